//! Per-word binary classifiers trained from scratch.
//!
//! Three backends share one training contract (positives, negatives, [`TrainConfig`]):
//! L1-regularized logistic regression, a one-hidden-layer tanh MLP with three units, and a
//! depth-limited GINI decision tree. The two gradient-based backends use full-batch [`adam`].

pub mod adam;
pub mod logreg;
pub mod mlp;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{AdamConfig, AdamState};
pub use logreg::{train_logreg, LogRegParams};
pub use mlp::{train_mlp, MlpParams, HIDDEN};
pub use tree::{train_tree, DecisionTree, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    LogReg,
    Mlp,
    Tree,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::LogReg => "logreg",
            Backend::Mlp => "mlp",
            Backend::Tree => "tree",
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logreg" => Ok(Backend::LogReg),
            "mlp" => Ok(Backend::Mlp),
            "tree" => Ok(Backend::Tree),
            other => Err(Error::Config(format!(
                "unknown backend {other:?} (expected logreg, mlp or tree)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub adam: AdamConfig,
    /// L2 penalty on MLP weights (biases excluded).
    pub l2_alpha: f64,
    /// L1 penalty on logistic-regression weights (bias excluded).
    pub l1_lambda: f64,
    pub tree_max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
    /// Training stops once the epoch-to-epoch loss change falls below this.
    pub convergence_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 2000,
            adam: AdamConfig::default(),
            l2_alpha: 0.1,
            l1_lambda: 1e-4,
            tree_max_depth: 2,
            min_leaf: 1,
            seed: 0,
            convergence_tol: 1e-6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        let rates = [
            ("learning_rate", a.learning_rate),
            ("eps", a.eps),
            ("l2_alpha", self.l2_alpha),
            ("l1_lambda", self.l1_lambda),
            ("convergence_tol", self.convergence_tol),
        ];
        for (name, v) in rates {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return Err(Error::Config("adam betas must be in [0, 1)".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::Config("min_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

/// Labeled examples with validated, uniform dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub xs: Vec<Vec<f64>>,
    /// 1.0 for positives, 0.0 for negatives.
    pub ys: Vec<f64>,
    pub dim: usize,
}

impl TrainingSet {
    pub fn from_classes(positives: &[Vec<f64>], negatives: &[Vec<f64>]) -> Result<Self> {
        let dim = positives
            .first()
            .or(negatives.first())
            .map(Vec::len)
            .ok_or_else(|| Error::InsufficientData("no training examples".into()))?;
        let mut xs = Vec::with_capacity(positives.len() + negatives.len());
        let mut ys = Vec::with_capacity(xs.capacity());
        for (class, label) in [(positives, 1.0), (negatives, 0.0)] {
            for x in class {
                if x.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: x.len(),
                    });
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("training feature".into()));
                }
                xs.push(x.clone());
                ys.push(label);
            }
        }
        Ok(TrainingSet { xs, ys, dim })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

pub(crate) fn require_both_classes(positives: &[Vec<f64>], negatives: &[Vec<f64>]) -> Result<()> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::InsufficientData(format!(
            "need at least one positive and one negative (got {} and {})",
            positives.len(),
            negatives.len()
        )));
    }
    Ok(())
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z) - y z`, the cross-entropy of a logit against a 0/1 label.
pub(crate) fn bce_with_logit(z: f64, y: f64) -> f64 {
    let softplus = if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    };
    softplus - y * z
}

/// A trained word classifier of any backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum WordClassifier {
    LogReg(LogRegParams),
    Mlp(MlpParams),
    Tree(DecisionTree),
}

impl WordClassifier {
    pub fn backend(&self) -> Backend {
        match self {
            WordClassifier::LogReg(_) => Backend::LogReg,
            WordClassifier::Mlp(_) => Backend::Mlp,
            WordClassifier::Tree(_) => Backend::Tree,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            WordClassifier::LogReg(p) => p.dim(),
            WordClassifier::Mlp(p) => p.dim(),
            WordClassifier::Tree(t) => t.dim,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(match self {
            WordClassifier::LogReg(p) => p.predict(x),
            WordClassifier::Mlp(p) => p.predict(x),
            WordClassifier::Tree(t) => t.root.predict(x),
        })
    }

    pub fn as_mlp(&self) -> Option<&MlpParams> {
        match self {
            WordClassifier::Mlp(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_tree(&self) -> Option<&DecisionTree> {
        match self {
            WordClassifier::Tree(t) => Some(t),
            _ => None,
        }
    }

    /// Trains a classifier of the given backend.
    pub fn train(
        backend: Backend,
        positives: &[Vec<f64>],
        negatives: &[Vec<f64>],
        config: &TrainConfig,
    ) -> Result<Self> {
        Ok(match backend {
            Backend::LogReg => WordClassifier::LogReg(train_logreg(positives, negatives, config)?),
            Backend::Mlp => WordClassifier::Mlp(train_mlp(positives, negatives, config)?),
            Backend::Tree => WordClassifier::Tree(train_tree(positives, negatives, config)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) <= 1.0 && sigmoid(800.0) > 0.999);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!((bce_with_logit(0.0, 1.0) - 2f64.ln()).abs() < 1e-15);
        assert!(bce_with_logit(-800.0, 0.0).abs() < 1e-300);
        assert!((bce_with_logit(-800.0, 1.0) - 800.0).abs() < 1e-9);
    }

    #[test]
    fn predict_checks_dimension() {
        let c = WordClassifier::LogReg(LogRegParams::zeros(3));
        assert_eq!(c.predict(&[1.0, 2.0, 3.0]).unwrap(), 0.5);
        assert!(matches!(
            c.predict(&[1.0]),
            Err(Error::DimensionMismatch { expected: 3, found: 1 })
        ));
    }

    #[test]
    fn tree_leaf_probability() {
        let c = WordClassifier::Tree(DecisionTree {
            dim: 1,
            root: TreeNode::Leaf { n_pos: 3, n_neg: 1 },
        });
        assert_eq!(c.predict(&[0.0]).unwrap(), 0.75);
        assert_eq!(c.predict(&[0.0]).unwrap(), c.predict(&[0.0]).unwrap());
    }

    #[test]
    fn training_set_requires_examples() {
        assert!(TrainingSet::from_classes(&[], &[]).is_err());
        assert!(TrainingSet::from_classes(&[vec![1.0]], &[vec![1.0, 2.0]]).is_err());
        let config = TrainConfig::default();
        for backend in [Backend::LogReg, Backend::Mlp] {
            assert!(matches!(
                WordClassifier::train(backend, &[vec![1.0]], &[], &config),
                Err(Error::InsufficientData(_))
            ));
        }
    }

    #[test]
    fn config_rates_must_be_positive() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.adam.learning_rate = 0.0;
        assert!(c.validate().is_err());
    }
}
