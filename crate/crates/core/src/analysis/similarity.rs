use std::fs;
use std::path::Path;

use serde::Serialize;

use super::embedding::{cosine, EmbeddingSource, EmbeddingTable};
use super::stats::spearman;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityPair {
    pub word_a: String,
    pub word_b: String,
    pub gold_score: f64,
}

/// Reads `word_a<TAB>word_b<TAB>score` lines. Words are lowercased to match the
/// tokenizer. A first line without a numeric score is taken as a header; blank lines and
/// lines starting with `#` are skipped.
pub fn load_similarity_pairs(path: impl AsRef<Path>) -> Result<Vec<SimilarityPair>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(Error::parse(path, lineno, "expected word_a<TAB>word_b<TAB>score"));
        }
        let score = match fields[2].parse::<f64>() {
            Ok(s) if s.is_finite() => s,
            Ok(_) => return Err(Error::parse(path, lineno, "non-finite score")),
            Err(_) if lineno == 1 => continue,
            Err(e) => return Err(Error::parse(path, lineno, format!("bad score: {e}"))),
        };
        pairs.push(SimilarityPair {
            word_a: fields[0].to_lowercase(),
            word_b: fields[1].to_lowercase(),
            gold_score: score,
        });
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableScore {
    pub source: EmbeddingSource,
    pub rho: f64,
    /// Pairs with both words in the table.
    pub coverage: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityReport {
    pub total_pairs: usize,
    pub tables: Vec<TableScore>,
    /// Present when more than one table was given.
    pub combined: Option<TableScore>,
}

fn unit(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / norm).collect()
    }
}

/// Concatenates the L2-normalized vectors of every word present in all tables.
pub fn combine_tables(tables: &[&EmbeddingTable]) -> Result<EmbeddingTable> {
    let first = tables
        .first()
        .ok_or_else(|| Error::InvalidInput("no embedding tables".into()))?;
    let dim = tables.iter().map(|t| t.dim).sum();
    let mut out = EmbeddingTable::new(EmbeddingSource::Combined, dim);
    for word in first.vectors.keys() {
        let parts: Option<Vec<&[f64]>> = tables.iter().map(|t| t.get(word)).collect();
        if let Some(parts) = parts {
            out.insert(word.clone(), parts.into_iter().flat_map(unit).collect())?;
        }
    }
    Ok(out)
}

fn score_table(table: &EmbeddingTable, pairs: &[SimilarityPair]) -> Result<TableScore> {
    let mut predicted = Vec::new();
    let mut gold = Vec::new();
    for p in pairs {
        if let (Some(a), Some(b)) = (table.get(&p.word_a), table.get(&p.word_b)) {
            predicted.push(cosine(a, b)?);
            gold.push(p.gold_score);
        }
    }
    if predicted.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{:?} table covers {} of {} pairs; at least 2 needed",
            table.source,
            predicted.len(),
            pairs.len()
        )));
    }
    Ok(TableScore {
        source: table.source,
        rho: spearman(&predicted, &gold)?,
        coverage: predicted.len(),
    })
}

/// Spearman correlation between cosine similarity and gold scores for each table, and for
/// their combination when several tables are given.
pub fn eval_similarity(tables: &[&EmbeddingTable], pairs: &[SimilarityPair]) -> Result<SimilarityReport> {
    if tables.is_empty() {
        return Err(Error::InvalidInput("no embedding tables".into()));
    }
    let scores = tables
        .iter()
        .map(|t| score_table(t, pairs))
        .collect::<Result<Vec<_>>>()?;
    let combined = if tables.len() > 1 {
        Some(score_table(&combine_tables(tables)?, pairs)?)
    } else {
        None
    };
    Ok(SimilarityReport {
        total_pairs: pairs.len(),
        tables: scores,
        combined,
    })
}
