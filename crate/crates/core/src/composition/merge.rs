//! Merging word MLPs into one network with a wider hidden layer.

use super::{check_dim, summed, ObjectScores};
use crate::classifiers::mlp::MlpParams;
use crate::classifiers::sigmoid;
use crate::data::Scene;
use crate::error::{Error, Result};
use crate::parser::NounPhrase;
use crate::wac::WacModel;

/// Concatenated hidden layers of `k` word MLPs. The output unit averages the constituent
/// logits: each block's output weights are scaled by `1/k` and the biases averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedMlp {
    pub blocks: Vec<MlpParams>,
}

impl MergedMlp {
    pub fn dim(&self) -> usize {
        self.blocks[0].dim()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let k = self.blocks.len() as f64;
        self.blocks.iter().map(|b| b.logit(x)).sum::<f64>() / k
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Hidden width of the merged network.
    pub fn hidden_units(&self) -> usize {
        self.blocks.iter().map(|b| b.b1.len()).sum()
    }
}

pub fn merge_mlps(mlps: &[&MlpParams]) -> Result<MergedMlp> {
    let first = mlps
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot merge zero MLPs".into()))?;
    let dim = first.dim();
    if let Some(bad) = mlps.iter().find(|m| m.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    Ok(MergedMlp {
        blocks: mlps.iter().map(|m| (*m).clone()).collect(),
    })
}

fn mlp_for<'m>(model: &'m WacModel, word: &str) -> Result<Option<&'m MlpParams>> {
    match model.classifier(word) {
        None => Ok(None),
        Some(c) => c.as_mlp().map(Some).ok_or_else(|| Error::BackendMismatch {
            operation: "MLP merging".into(),
            required: "mlp".into(),
            found: c.backend().to_string(),
        }),
    }
}

fn apply(merged: &MergedMlp, model: &WacModel, scene: &Scene, scores: &mut [f64]) -> Result<()> {
    for (s, e) in scores.iter_mut().zip(&scene.entities) {
        check_dim(model, e.features.len())?;
        *s += merged.predict(&e.features);
    }
    Ok(())
}

/// Each adjective-noun pair is scored by its merged MLP; the remaining words by their own
/// classifiers. Contributions are summed per object.
pub fn compose_adj_noun_extended(model: &WacModel, np: &NounPhrase, scene: &Scene) -> Result<ObjectScores> {
    model.require_backend(crate::classifiers::Backend::Mlp, "adjective-noun merging")?;
    let mut scores = ObjectScores::zeros(scene);
    let mut used = 0usize;
    for (adj, noun) in &np.adj_noun_pairs {
        let known: Vec<&MlpParams> = [adj, noun]
            .into_iter()
            .filter_map(|w| mlp_for(model, w).transpose())
            .collect::<Result<_>>()?;
        if known.is_empty() {
            continue;
        }
        apply(&merge_mlps(&known)?, model, scene, &mut scores.scores)?;
        used += 1;
    }
    for w in np.standalone_words() {
        used += summed::add_word(model, w, scene, &mut scores.scores)? as usize;
    }
    Ok(if used == 0 {
        ObjectScores::uniform(scene)
    } else {
        scores
    })
}

/// All in-vocabulary words merged into a single MLP.
pub fn compose_mlp_extended<S: AsRef<str>>(model: &WacModel, words: &[S], scene: &Scene) -> Result<ObjectScores> {
    model.require_backend(crate::classifiers::Backend::Mlp, "MLP merging")?;
    let known: Vec<&MlpParams> = words
        .iter()
        .filter_map(|w| mlp_for(model, w.as_ref()).transpose())
        .collect::<Result<_>>()?;
    if known.is_empty() {
        return Ok(ObjectScores::uniform(scene));
    }
    let mut scores = ObjectScores::zeros(scene);
    apply(&merge_mlps(&known)?, model, scene, &mut scores.scores)?;
    Ok(scores)
}
