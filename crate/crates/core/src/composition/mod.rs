//! Turning per-word classifiers into a score for each candidate object.
//!
//! Apply-then-compose strategies score every word separately and add the results.
//! Compose-then-apply strategies first build one classifier for the phrase (merged MLPs,
//! warm-started MLPs, grafted trees) and then apply it. The relational strategy scores
//! ordered object pairs.

mod eval;
mod graft;
mod merge;
mod relational;
mod summed;
mod warm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use eval::{evaluate, is_relational_expression, Accuracy, Tally};
pub use graft::{graft_trees, grafted_tree};
pub use merge::{compose_adj_noun_extended, compose_mlp_extended, merge_mlps, MergedMlp};
pub use relational::{resolve_relational, train_relational, RelationalTraining};
pub use summed::{compose_summed, IncrementalResolver};
pub use warm::{warm_start_pair, WarmStartCache};

use crate::classifiers::{Backend, TrainConfig};
use crate::data::{Dataset, Scene};
use crate::error::{Error, Result};
use crate::parser::{self, extract_adj_noun_pairs, Lexicons, NounPhrase};
use crate::wac::WacModel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    SummedPredictions,
    MlpAdjNounExtended,
    MlpAdjNounWarmStart,
    MlpExtended,
    TreeGraft,
    Relational(Box<Strategy>),
}

impl Strategy {
    /// The backend this strategy needs, or `None` when any backend works.
    pub fn required_backend(&self) -> Option<Backend> {
        match self {
            Strategy::SummedPredictions => None,
            Strategy::MlpAdjNounExtended | Strategy::MlpAdjNounWarmStart | Strategy::MlpExtended => Some(Backend::Mlp),
            Strategy::TreeGraft => Some(Backend::Tree),
            Strategy::Relational(np) => np.required_backend(),
        }
    }

    pub fn check_backend(&self, backend: Backend) -> Result<()> {
        match self.required_backend() {
            Some(required) if required != backend => Err(Error::BackendMismatch {
                operation: format!("strategy {self:?}"),
                required: required.to_string(),
                found: backend.to_string(),
            }),
            _ => Ok(()),
        }
    }

    pub fn is_relational(&self) -> bool {
        matches!(self, Strategy::Relational(_))
    }
}

/// A strategy together with the backend it runs on, named as on the command line
/// (`logreg-summed`, `mlp-extended`, `relational`, ...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategySpec {
    pub strategy: Strategy,
    pub backend: Backend,
}

impl StrategySpec {
    pub const NAMES: [&'static str; 8] = [
        "logreg-summed",
        "mlp-summed",
        "mlp-adjnoun-extended",
        "mlp-adjnoun-warmstart",
        "mlp-extended",
        "tree-summed",
        "tree-graft",
        "relational",
    ];

    pub fn new(strategy: Strategy, backend: Backend) -> Result<Self> {
        strategy.check_backend(backend)?;
        Ok(StrategySpec { strategy, backend })
    }

    /// The relational strategy for a backend: extended MLP noun phrases on the MLP backend,
    /// summed predictions elsewhere.
    pub fn relational_for(backend: Backend) -> Self {
        let np = match backend {
            Backend::Mlp => Strategy::MlpExtended,
            _ => Strategy::SummedPredictions,
        };
        StrategySpec {
            strategy: Strategy::Relational(Box::new(np)),
            backend,
        }
    }
}

impl FromStr for StrategySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use Strategy::*;
        if let Some(inner) = s.strip_prefix("relational(").and_then(|r| r.strip_suffix(')')) {
            let inner: StrategySpec = inner.parse()?;
            if inner.strategy.is_relational() {
                return Err(Error::Config("relational strategies do not nest".into()));
            }
            return Ok(StrategySpec {
                strategy: Relational(Box::new(inner.strategy)),
                backend: inner.backend,
            });
        }
        let (strategy, backend) = match s {
            "logreg-summed" => (SummedPredictions, Backend::LogReg),
            "mlp-summed" => (SummedPredictions, Backend::Mlp),
            "tree-summed" => (SummedPredictions, Backend::Tree),
            "mlp-adjnoun-extended" => (MlpAdjNounExtended, Backend::Mlp),
            "mlp-adjnoun-warmstart" => (MlpAdjNounWarmStart, Backend::Mlp),
            "mlp-extended" => (MlpExtended, Backend::Mlp),
            "tree-graft" => (TreeGraft, Backend::Tree),
            "relational" => (Relational(Box::new(MlpExtended)), Backend::Mlp),
            other => {
                return Err(Error::Config(format!(
                    "unknown strategy {other:?}; expected one of {}",
                    Self::NAMES.join(", ")
                )))
            }
        };
        Ok(StrategySpec { strategy, backend })
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Strategy::*;
        let name = match (&self.strategy, self.backend) {
            (SummedPredictions, b) => return write!(f, "{b}-summed"),
            (MlpAdjNounExtended, _) => "mlp-adjnoun-extended",
            (MlpAdjNounWarmStart, _) => "mlp-adjnoun-warmstart",
            (MlpExtended, _) => "mlp-extended",
            (TreeGraft, _) => "tree-graft",
            (Relational(np), b) if **np == MlpExtended && b == Backend::Mlp => "relational",
            (Relational(np), b) => {
                let inner = StrategySpec {
                    strategy: (**np).clone(),
                    backend: b,
                };
                return write!(f, "relational({inner})");
            }
        };
        f.write_str(name)
    }
}

/// One non-negative score per scene entity, in scene order.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectScores {
    pub object_ids: Vec<String>,
    pub scores: Vec<f64>,
    /// Set when the scores form a distribution.
    pub normalized: bool,
}

/// Sums below this are treated as zero when normalizing.
pub const NORMALIZE_FLOOR: f64 = 1e-12;

impl ObjectScores {
    pub fn zeros(scene: &Scene) -> Self {
        ObjectScores {
            object_ids: scene.entities.iter().map(|e| e.object_id.clone()).collect(),
            scores: vec![0.0; scene.entities.len()],
            normalized: false,
        }
    }

    pub fn uniform(scene: &Scene) -> Self {
        let n = scene.entities.len();
        ObjectScores {
            scores: vec![1.0 / n as f64; n],
            normalized: true,
            ..Self::zeros(scene)
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, object_id: &str) -> Option<f64> {
        self.object_ids
            .iter()
            .position(|o| o == object_id)
            .map(|i| self.scores[i])
    }

    /// Index of the highest score; the earliest entity wins ties.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &s) in self.scores.iter().enumerate() {
            if best.is_none_or(|b| s > self.scores[b]) {
                best = Some(i);
            }
        }
        best
    }

    pub fn best(&self) -> Option<&str> {
        self.argmax().map(|i| self.object_ids[i].as_str())
    }

    /// Divides by the total. A total below [`NORMALIZE_FLOOR`] yields the uniform
    /// distribution, so the result always sums to one.
    pub fn normalize(&self) -> Self {
        let total: f64 = self.scores.iter().sum();
        let n = self.scores.len() as f64;
        let scores = if total < NORMALIZE_FLOOR {
            vec![1.0 / n; self.scores.len()]
        } else {
            self.scores.iter().map(|s| s / total).collect()
        };
        ObjectScores {
            object_ids: self.object_ids.clone(),
            scores,
            normalized: true,
        }
    }
}

/// The winning object and the full score vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub predicted: String,
    pub scores: ObjectScores,
}

/// Read-only resolution context. Warm-start composition additionally needs the training
/// data that the adjective classifiers were fit on.
pub struct Resolver<'a> {
    pub model: &'a WacModel,
    pub lexicons: &'a Lexicons,
    warm: Option<WarmContext<'a>>,
}

struct WarmContext<'a> {
    dataset: &'a Dataset,
    config: TrainConfig,
    cache: WarmStartCache,
}

impl<'a> Resolver<'a> {
    pub fn new(model: &'a WacModel, lexicons: &'a Lexicons) -> Self {
        Resolver {
            model,
            lexicons,
            warm: None,
        }
    }

    /// Enables warm-start composition, training pairs on demand from `dataset`.
    pub fn with_warm_start(mut self, dataset: &'a Dataset, config: TrainConfig) -> Self {
        self.warm = Some(WarmContext {
            dataset,
            config,
            cache: WarmStartCache::default(),
        });
        self
    }

    pub fn resolve(&self, tokens: &[String], scene: &Scene, strategy: &Strategy) -> Result<Resolution> {
        strategy.check_backend(self.model.backend)?;
        if scene.entities.is_empty() {
            return Err(Error::InvalidInput(format!("scene {} has no entities", scene.scene_id)));
        }
        let scores = match strategy {
            Strategy::Relational(np_strategy) => {
                let parsed = parser::parse(tokens, self.lexicons);
                match parsed.relational_view(self.lexicons) {
                    Some(view) => resolve_relational(self, &view, scene, np_strategy)?,
                    None => self.compose(&self.whole_expression(tokens), scene, np_strategy)?,
                }
            }
            other => self.compose(&self.whole_expression(tokens), scene, other)?,
        };
        let predicted = scores.best().expect("non-empty scene").to_string();
        Ok(Resolution { predicted, scores })
    }

    /// All content words of the expression as a single phrase, relation words included.
    pub fn whole_expression(&self, tokens: &[String]) -> NounPhrase {
        let content: Vec<String> = self
            .lexicons
            .content_words(tokens)
            .into_iter()
            .map(str::to_owned)
            .collect();
        NounPhrase {
            adj_noun_pairs: extract_adj_noun_pairs(&content, self.lexicons),
            tokens: content,
        }
    }

    /// Scores a phrase with a non-relational strategy.
    pub fn compose(&self, np: &NounPhrase, scene: &Scene, strategy: &Strategy) -> Result<ObjectScores> {
        strategy.check_backend(self.model.backend)?;
        match strategy {
            Strategy::SummedPredictions => compose_summed(self.model, &np.tokens, scene),
            Strategy::MlpAdjNounExtended => compose_adj_noun_extended(self.model, np, scene),
            Strategy::MlpAdjNounWarmStart => self.compose_warm(np, scene),
            Strategy::MlpExtended => compose_mlp_extended(self.model, &np.tokens, scene),
            Strategy::TreeGraft => graft::compose_tree_graft(self.model, &np.tokens, scene),
            Strategy::Relational(inner) => self.compose(np, scene, inner),
        }
    }

    fn compose_warm(&self, np: &NounPhrase, scene: &Scene) -> Result<ObjectScores> {
        let warm = self
            .warm
            .as_ref()
            .ok_or_else(|| Error::Config("warm-start composition needs the training dataset".into()))?;
        let mut scores = ObjectScores::zeros(scene);
        let mut used = 0usize;
        for (adj, noun) in &np.adj_noun_pairs {
            if !self.model.contains(adj) || !self.model.contains(noun) {
                // fall back to whichever member is known
                for w in [adj, noun] {
                    used += summed::add_word(self.model, w, scene, &mut scores.scores)? as usize;
                }
                continue;
            }
            let pair = warm
                .cache
                .get_or_train(self.model, adj, noun, warm.dataset, &warm.config)?;
            for (s, e) in scores.scores.iter_mut().zip(&scene.entities) {
                check_dim(self.model, e.features.len())?;
                *s += pair.predict(&e.features);
            }
            used += 1;
        }
        for w in np.standalone_words() {
            used += summed::add_word(self.model, w, scene, &mut scores.scores)? as usize;
        }
        Ok(if used == 0 {
            ObjectScores::uniform(scene)
        } else {
            scores
        })
    }
}

pub(crate) fn check_dim(model: &WacModel, found: usize) -> Result<()> {
    if found != model.feature_dim {
        return Err(Error::DimensionMismatch {
            expected: model.feature_dim,
            found,
        });
    }
    Ok(())
}
