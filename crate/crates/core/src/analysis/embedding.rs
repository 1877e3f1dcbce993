use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::Backend;
use crate::error::{Error, Result};
use crate::wac::WacModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingSource {
    WacHidden,
    External,
    Combined,
}

/// Word vectors of one uniform length.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub source: EmbeddingSource,
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(source: EmbeddingSource, dim: usize) -> Self {
        EmbeddingTable {
            source,
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<Option<Vec<f64>>> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding vector".into()));
        }
        Ok(self.vectors.insert(word.into(), vector))
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// The word's first-layer weights, flattened row by row (hidden unit by hidden unit).
/// Biases are left out.
pub fn extract_embedding(model: &WacModel, word: &str) -> Result<Vec<f64>> {
    model.require_backend(Backend::Mlp, "embedding extraction")?;
    let c = model
        .classifier(word)
        .ok_or_else(|| Error::OutOfVocabulary(word.to_string()))?;
    Ok(c.as_mlp().expect("backend checked").w1.clone())
}

/// Embeddings for the whole vocabulary.
pub fn wac_embeddings(model: &WacModel) -> Result<EmbeddingTable> {
    model.require_backend(Backend::Mlp, "embedding extraction")?;
    let mut table = EmbeddingTable::new(
        EmbeddingSource::WacHidden,
        crate::classifiers::mlp::HIDDEN * model.feature_dim,
    );
    for word in model.vocabulary() {
        table.insert(word, extract_embedding(model, word)?)?;
    }
    Ok(table)
}

/// Cosine similarity. A zero vector has similarity 0 to everything.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        log::warn!("cosine with a zero vector; using 0");
        return Ok(0.0);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Reads `word v1 ... vd` lines. The first line fixes `d`; a later duplicate word
/// replaces the earlier one.
pub fn load_external_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut table: Option<EmbeddingTable> = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let vector: Vec<f64> = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, lineno, format!("bad number: {e}")))?;
        let table = table.get_or_insert_with(|| EmbeddingTable::new(EmbeddingSource::External, vector.len()));
        if vector.len() != table.dim {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {} values, found {}", table.dim, vector.len()),
            ));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(path, lineno, "non-finite value"));
        }
        if table.insert(word, vector)?.is_some() {
            log::warn!(
                "{}:{lineno}: duplicate word {word:?}; keeping the later vector",
                path.display()
            );
        }
    }
    table.ok_or_else(|| Error::parse(path, 1, "no embeddings found"))
}

/// One `word v1 ... vd` line per word, in word order.
pub fn embeddings_to_text(table: &EmbeddingTable) -> String {
    let mut out = String::new();
    for (word, v) in &table.vectors {
        out.push_str(word);
        for x in v {
            // shortest representation that parses back to the same value
            write!(out, " {x:?}").expect("write to string");
        }
        out.push('\n');
    }
    out
}

pub fn save_embeddings(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, embeddings_to_text(table)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cosine_known_values() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let v = [0.3, -1.2, 4.0];
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert!((cosine(&v, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(cosine(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn external_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vec.txt");
        fs::write(&p, "cat 1 2 3\ndog 4 5 6\n").unwrap();
        let t = load_external_embeddings(&p).unwrap();
        assert_eq!((t.len(), t.dim), (2, 3));

        fs::write(&p, "cat 1 2 3\ncat 7 8 9\n").unwrap();
        assert_eq!(
            load_external_embeddings(&p).unwrap().get("cat").unwrap(),
            &[7.0, 8.0, 9.0]
        );

        fs::write(&p, "cat 1 2 3\ndog 4 5\n").unwrap();
        assert!(matches!(
            load_external_embeddings(&p),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn scale_invariance(
            u in prop::collection::vec(-10.0f64..10.0, 5),
            v in prop::collection::vec(-10.0f64..10.0, 5),
            a in 0.01f64..100.0,
            b in 0.01f64..100.0,
        ) {
            let su: Vec<f64> = u.iter().map(|x| x * a).collect();
            let sv: Vec<f64> = v.iter().map(|x| x * b).collect();
            prop_assert!((cosine(&u, &v).unwrap() - cosine(&su, &sv).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn save_load_roundtrip(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 4), 1..6)) {
            let mut t = EmbeddingTable::new(EmbeddingSource::External, 4);
            for (i, r) in rows.into_iter().enumerate() {
                t.insert(format!("w{i}"), r).unwrap();
            }
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("t.txt");
            save_embeddings(&t, &p).unwrap();
            prop_assert_eq!(load_external_embeddings(&p).unwrap(), t);
        }
    }
}
