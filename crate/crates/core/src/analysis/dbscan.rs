use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label of points that belong to no cluster.
pub const NOISE: i64 = -1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub eps: f64,
    /// Neighbors within `eps`, the point itself included, that make a core point.
    pub min_pts: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig { eps: 0.7, min_pts: 5 }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config("eps must be positive".into()));
        }
        if self.min_pts < 1 {
            return Err(Error::Config("min_pts must be at least 1".into()));
        }
        Ok(())
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Density-based clustering with Euclidean distance. Cluster ids are assigned in the
/// order their first core point appears in the input; noise is [`NOISE`].
pub fn dbscan(points: &[Vec<f64>], config: &ClusterConfig) -> Result<Vec<i64>> {
    config.validate()?;
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("input point".into()));
    }
    if let Some(first) = points.first() {
        if let Some(bad) = points.iter().find(|p| p.len() != first.len()) {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                found: bad.len(),
            });
        }
    }
    let eps2 = config.eps * config.eps;
    let neighbors: Vec<Vec<usize>> = points
        .iter()
        .map(|p| (0..points.len()).filter(|&j| dist2(p, &points[j]) <= eps2).collect())
        .collect();
    let is_core = |i: usize| neighbors[i].len() >= config.min_pts;

    let mut labels: Vec<Option<i64>> = vec![None; points.len()];
    let mut next = 0i64;
    for start in 0..points.len() {
        if labels[start].is_some() || !is_core(start) {
            continue;
        }
        let id = next;
        next += 1;
        labels[start] = Some(id);
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            if !is_core(i) {
                continue;
            }
            for &j in &neighbors[i] {
                if labels[j].is_none() {
                    labels[j] = Some(id);
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(labels.into_iter().map(|l| l.unwrap_or(NOISE)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn blobs() -> Vec<Vec<f64>> {
        let mut pts = Vec::new();
        for (cx, cy) in [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)] {
            for k in 0..6 {
                let a = k as f64;
                pts.push(vec![cx + 0.05 * a.cos(), cy + 0.05 * a.sin()]);
            }
        }
        pts
    }

    #[test]
    fn three_blobs_and_noise() {
        let mut pts = blobs();
        pts.push(vec![5.0, 5.0]);
        let labels = dbscan(&pts, &ClusterConfig::default()).unwrap();
        assert_eq!(&labels[..6], &[0; 6]);
        assert_eq!(&labels[6..12], &[1; 6]);
        assert_eq!(&labels[12..18], &[2; 6]);
        assert_eq!(labels[18], NOISE);
    }

    #[test]
    fn border_points_join_first_cluster() {
        // a border point reachable from a core point is not noise
        let mut pts: Vec<Vec<f64>> = (0..5).map(|k| vec![0.01 * k as f64, 0.0]).collect();
        pts.push(vec![0.6, 0.0]);
        let labels = dbscan(&pts, &ClusterConfig::default()).unwrap();
        assert_eq!(labels, vec![0; 6]);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(dbscan(&blobs(), &ClusterConfig { eps: 0.0, min_pts: 5 }).is_err());
        assert!(dbscan(&blobs(), &ClusterConfig { eps: 1.0, min_pts: 0 }).is_err());
    }

    proptest! {
        #[test]
        fn rigid_motion_invariance(
            pts in prop::collection::vec((0.0f64..4.0, 0.0f64..4.0), 1..40),
            dx in -50.0f64..50.0,
            dy in -50.0f64..50.0,
            theta in 0.0f64..std::f64::consts::TAU,
        ) {
            // coordinates on a 1/64 grid keep distances away from the eps boundary after rotation
            let pts: Vec<Vec<f64>> = pts.iter().map(|(x, y)| vec![(x * 64.0).round() / 64.0 + 1e-3, (y * 64.0).round() / 64.0]).collect();
            let config = ClusterConfig { eps: 0.7 + 1e-7, min_pts: 3 };
            let base = dbscan(&pts, &config).unwrap();
            let (s, c) = theta.sin_cos();
            let moved: Vec<Vec<f64>> = pts.iter().map(|p| vec![c * p[0] - s * p[1] + dx, s * p[0] + c * p[1] + dy]).collect();
            prop_assert_eq!(dbscan(&moved, &config).unwrap(), base);
        }
    }
}
