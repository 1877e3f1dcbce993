//! Exact t-SNE with per-point bandwidth calibration, momentum and adaptive gains.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneResult {
    pub embedding: Vec<[f64; 2]>,
    /// KL(P || Q) at the random initialization and after the last iteration.
    pub initial_kl: f64,
    pub final_kl: f64,
    /// Perplexity actually targeted; lowered when there are too few points.
    pub perplexity: f64,
    /// Per point, `|2^H(P_i) - perplexity|`.
    pub perplexity_residuals: Vec<f64>,
}

const CALIBRATION_STEPS: usize = 200;
/// Entropy tolerance (bits) of the bandwidth search.
const ENTROPY_TOL: f64 = 1e-10;
const P_FLOOR: f64 = 1e-12;

fn squared_distances(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Conditional distribution of row `i` for precision `beta`, and its entropy in bits.
fn conditional(dist: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let n = out.len();
    let min = (0..n)
        .filter(|&j| j != i)
        .map(|j| dist[j])
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for j in 0..n {
        out[j] = if j == i { 0.0 } else { (-beta * (dist[j] - min)).exp() };
        sum += out[j];
    }
    let mut h = 0.0;
    for p in out.iter_mut() {
        *p /= sum;
        if *p > 0.0 {
            h -= *p * p.log2();
        }
    }
    h
}

/// Bisection on the precision of each point so the conditional entropy equals
/// `log2(perplexity)`. Returns row-normalized conditionals and residuals.
fn calibrate(dist: &[f64], n: usize, perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let target = perplexity.log2();
    let mut p = vec![0.0; n * n];
    let mut residuals = vec![0.0; n];
    for i in 0..n {
        let row = &dist[i * n..(i + 1) * n];
        let out = &mut p[i * n..(i + 1) * n];
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut beta = 1.0;
        let mut h = conditional(row, i, beta, out);
        for _ in 0..CALIBRATION_STEPS {
            if (h - target).abs() < ENTROPY_TOL {
                break;
            }
            if h > target {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            h = conditional(row, i, beta, out);
        }
        residuals[i] = (h.exp2() - perplexity).abs();
    }
    (p, residuals)
}

fn kl_divergence(p: &[f64], q_num: &[f64], q_sum: f64) -> f64 {
    p.iter()
        .zip(q_num)
        .filter(|(pij, _)| **pij > 0.0)
        .map(|(pij, num)| {
            let q = (num / q_sum).max(P_FLOOR);
            pij * (pij / q).ln()
        })
        .sum()
}

/// Student-t kernel values `1 / (1 + |y_i - y_j|^2)` (zero on the diagonal) and their sum.
fn q_numerators(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            sum += 2.0 * v;
        }
    }
    (num, sum)
}

/// Embeds the rows in two dimensions. The perplexity is lowered to `(n - 1) / 3` when the
/// input has too few points to support it.
pub fn tsne(rows: &[Vec<f64>], config: &TsneConfig) -> Result<TsneResult> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InsufficientData("t-SNE needs at least two points".into()));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != rows[0].len()) {
        return Err(Error::DimensionMismatch {
            expected: rows[0].len(),
            found: bad.len(),
        });
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-SNE input".into()));
    }
    if !(config.perplexity > 0.0 && config.learning_rate > 0.0) {
        return Err(Error::Config("perplexity and learning_rate must be positive".into()));
    }
    let max_perplexity = ((n - 1) as f64 / 3.0).max(1.0);
    let perplexity = if config.perplexity > max_perplexity {
        log::warn!(
            "perplexity {} is too large for {n} points; using {max_perplexity:.3}",
            config.perplexity
        );
        max_perplexity
    } else {
        config.perplexity
    };

    let dist = squared_distances(rows);
    let (cond, residuals) = calibrate(&dist, n, perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(P_FLOOR);
            }
        }
    }

    let mut rng = seed::stream(config.seed, "tsne-init");
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect();
    let (num, sum) = q_numerators(&y);
    let initial_kl = kl_divergence(&p, &num, sum);

    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    for iter in 0..config.iterations {
        let exaggeration = if iter < config.exaggeration_iterations {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < config.exaggeration_iterations {
            config.initial_momentum
        } else {
            config.final_momentum
        };
        let (num, sum) = q_numerators(&y);
        for i in 0..n {
            let mut grad = [0.0f64; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let k = i * n + j;
                let mult = (exaggeration * p[k] - num[k] / sum) * num[k];
                grad[0] += mult * (y[i][0] - y[j][0]);
                grad[1] += mult * (y[i][1] - y[j][1]);
            }
            for d in 0..2 {
                let g = 4.0 * grad[d];
                gains[i][d] = if (g > 0.0) != (update[i][d] > 0.0) {
                    gains[i][d] + 0.2
                } else {
                    (gains[i][d] * 0.8).max(0.01)
                };
                update[i][d] = momentum * update[i][d] - config.learning_rate * gains[i][d] * g;
            }
        }
        for (yi, ui) in y.iter_mut().zip(&update) {
            yi[0] += ui[0];
            yi[1] += ui[1];
        }
        let mean = y.iter().fold([0.0, 0.0], |m, yi| [m[0] + yi[0], m[1] + yi[1]]);
        for yi in &mut y {
            yi[0] -= mean[0] / n as f64;
            yi[1] -= mean[1] / n as f64;
        }
        if y.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("t-SNE diverged".into()));
        }
    }
    let (num, sum) = q_numerators(&y);
    let final_kl = kl_divergence(&p, &num, sum);
    Ok(TsneResult {
        embedding: y,
        initial_kl,
        final_kl,
        perplexity,
        perplexity_residuals: residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(per: usize, dim: usize) -> Vec<Vec<f64>> {
        let mut rng = seed::stream(7, "blobs");
        let normal = Normal::new(0.0, 1.0).unwrap();
        (0..2 * per)
            .map(|i| {
                let offset = if i < per { 0.0 } else { 20.0 };
                (0..dim).map(|_| offset + normal.sample(&mut rng)).collect()
            })
            .collect()
    }

    #[test]
    fn calibration_hits_target() {
        let rows = blobs(30, 5);
        let dist = squared_distances(&rows);
        let (p, res) = calibrate(&dist, rows.len(), 10.0);
        assert!(res.iter().all(|r| *r < 1e-4), "{res:?}");
        for i in 0..rows.len() {
            let s: f64 = p[i * rows.len()..(i + 1) * rows.len()].iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn separates_blobs_and_lowers_kl() {
        let rows = blobs(25, 50);
        let config = TsneConfig {
            perplexity: 10.0,
            ..TsneConfig::default()
        };
        let r = tsne(&rows, &config).unwrap();
        assert!(r.final_kl < r.initial_kl);
        // the blobs are split by the line through the midpoint, perpendicular to the
        // segment joining the two centroids
        let centroid = |s: &[[f64; 2]]| {
            let n = s.len() as f64;
            [
                s.iter().map(|p| p[0]).sum::<f64>() / n,
                s.iter().map(|p| p[1]).sum::<f64>() / n,
            ]
        };
        let (a, b) = (centroid(&r.embedding[..25]), centroid(&r.embedding[25..]));
        let dir = [b[0] - a[0], b[1] - a[1]];
        let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        let side = |p: &[f64; 2]| (p[0] - mid[0]) * dir[0] + (p[1] - mid[1]) * dir[1];
        assert!(r.embedding[..25].iter().all(|p| side(p) < 0.0));
        assert!(r.embedding[25..].iter().all(|p| side(p) > 0.0));
    }

    #[test]
    fn duplicates_coincide() {
        // four clusters in 10-D, each shifted along its own axis, plus a copy of row 0
        let mut rng = seed::stream(3, "dup");
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rows: Vec<Vec<f64>> = (0..100)
            .map(|i| {
                (0..10)
                    .map(|d| if d == i / 25 { 30.0 } else { 0.0 } + normal.sample(&mut rng))
                    .collect()
            })
            .collect();
        rows.push(rows[0].clone());
        let r = tsne(&rows, &TsneConfig::default()).unwrap();
        let e = &r.embedding;
        let dist = |a: &[f64; 2], b: &[f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let diameter = e
            .iter()
            .flat_map(|a| e.iter().map(move |b| dist(a, b)))
            .fold(0.0, f64::max);
        assert!(dist(&e[0], &e[100]) < 0.01 * diameter);
    }

    #[test]
    fn deterministic_and_checked() {
        let rows = blobs(5, 3);
        let config = TsneConfig {
            iterations: 50,
            ..TsneConfig::default()
        };
        assert_eq!(tsne(&rows, &config).unwrap(), tsne(&rows, &config).unwrap());
        assert!(tsne(&[vec![f64::NAN, 0.0], vec![0.0, 0.0]], &config).is_err());
        assert!(tsne(&[vec![0.0]], &config).is_err());
    }
}
