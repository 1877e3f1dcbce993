use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::dbscan::{dbscan, ClusterConfig, NOISE};
use super::embedding::EmbeddingTable;
use super::tsne::{tsne, TsneConfig, TsneResult};
use crate::error::{Error, Result};

/// Shifts each axis to zero mean and scales it to unit variance. An axis with no spread is
/// only centered.
pub fn standardize(points: &[[f64; 2]]) -> Vec<Vec<f64>> {
    let n = points.len() as f64;
    let mut out: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
    for d in 0..2 {
        let mean = points.iter().map(|p| p[d]).sum::<f64>() / n;
        let sd = (points.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>() / n).sqrt();
        for p in &mut out {
            p[d] -= mean;
            if sd > 0.0 {
                p[d] /= sd;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordClusters {
    pub words: Vec<String>,
    /// Standardized 2-D coordinates fed to DBSCAN.
    pub coords: Vec<Vec<f64>>,
    pub labels: Vec<i64>,
    pub tsne: TsneResult,
}

impl WordClusters {
    /// Cluster id to member words; noise is left out.
    pub fn clusters(&self) -> BTreeMap<i64, Vec<&str>> {
        let mut out: BTreeMap<i64, Vec<&str>> = BTreeMap::new();
        for (w, &l) in self.words.iter().zip(&self.labels) {
            if l != NOISE {
                out.entry(l).or_default().push(w);
            }
        }
        out
    }

    pub fn noise(&self) -> Vec<&str> {
        self.words
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == NOISE)
            .map(|(w, _)| w.as_str())
            .collect()
    }

    /// One row per word: `word  cluster  x  y`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("word\tcluster\tx\ty\n");
        for ((w, l), c) in self.words.iter().zip(&self.labels).zip(&self.coords) {
            writeln!(out, "{w}\t{l}\t{}\t{}", c[0], c[1]).expect("write to string");
        }
        out
    }
}

/// t-SNE to two dimensions, per-axis standardization, then DBSCAN. Words are taken in the
/// table's (sorted) order.
pub fn cluster_embeddings(
    table: &EmbeddingTable,
    tsne_config: &TsneConfig,
    cluster_config: &ClusterConfig,
) -> Result<WordClusters> {
    if table.len() < 2 {
        return Err(Error::InsufficientData("clustering needs at least two words".into()));
    }
    let words: Vec<String> = table.vectors.keys().cloned().collect();
    let rows: Vec<Vec<f64>> = table.vectors.values().cloned().collect();
    let tsne = tsne(&rows, tsne_config)?;
    let coords = standardize(&tsne.embedding);
    let labels = dbscan(&coords, cluster_config)?;
    Ok(WordClusters {
        words,
        coords,
        labels,
        tsne,
    })
}
