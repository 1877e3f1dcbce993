//! Logistic regression with an L1 penalty on the weights.
//!
//! The smooth cross-entropy part is minimized with adam; after every step the weights (not
//! the bias) go through the soft-threshold proximal map of `lr * l1_lambda`, which produces
//! exact zeros.

use serde::{Deserialize, Serialize};

use super::{bce_with_logit, require_both_classes, sigmoid, AdamState, TrainConfig, TrainingSet};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogRegParams {
    pub fn zeros(dim: usize) -> Self {
        LogRegParams {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// `[weights..., bias]`
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        v.push(self.bias);
        v
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        let (w, b) = flat.split_at(flat.len() - 1);
        LogRegParams {
            weights: w.to_vec(),
            bias: b[0],
        }
    }
}

/// Mean cross-entropy and its gradient with respect to `[weights..., bias]`.
pub fn loss_and_gradient(params: &LogRegParams, data: &TrainingSet) -> (f64, Vec<f64>) {
    let n = data.len() as f64;
    let d = params.dim();
    let mut grad = vec![0.0; d + 1];
    let mut loss = 0.0;
    for (x, &y) in data.xs.iter().zip(&data.ys) {
        let z = params.logit(x);
        loss += bce_with_logit(z, y);
        let r = (sigmoid(z) - y) / n;
        for (g, v) in grad[..d].iter_mut().zip(x) {
            *g += r * v;
        }
        grad[d] += r;
    }
    (loss / n, grad)
}

/// Cross-entropy plus the L1 penalty.
pub fn objective(params: &LogRegParams, data: &TrainingSet, l1_lambda: f64) -> f64 {
    let (loss, _) = loss_and_gradient(params, data);
    loss + l1_lambda * params.weights.iter().map(|w| w.abs()).sum::<f64>()
}

fn soft_threshold(w: f64, t: f64) -> f64 {
    w.signum() * (w.abs() - t).max(0.0)
}

pub fn train_logreg(positives: &[Vec<f64>], negatives: &[Vec<f64>], config: &TrainConfig) -> Result<LogRegParams> {
    require_both_classes(positives, negatives)?;
    let data = TrainingSet::from_classes(positives, negatives)?;
    let d = data.dim;
    let mut flat = vec![0.0; d + 1];
    let mut adam = AdamState::new(d + 1);
    let shrink = config.adam.learning_rate * config.l1_lambda;
    let mut prev: Option<f64> = None;
    for _ in 0..config.max_epochs {
        let params = LogRegParams::from_flat(&flat);
        let (loss, grad) = loss_and_gradient(&params, &data);
        let total = loss + config.l1_lambda * params.weights.iter().map(|w| w.abs()).sum::<f64>();
        if let Some(p) = prev {
            if (p - total).abs() < config.convergence_tol {
                break;
            }
        }
        prev = Some(total);
        adam.step(&mut flat, &grad, &config.adam)?;
        for w in &mut flat[..d] {
            *w = soft_threshold(*w, shrink);
        }
    }
    Ok(LogRegParams::from_flat(&flat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_predict_half() {
        let p = LogRegParams::zeros(4);
        assert_eq!(p.predict(&[1.0, -3.0, 2.0, 0.0]), 0.5);
    }

    /// Grid search over (w, b) for the 1-D problem as an independent reference: the best
    /// fit on a coarse grid already separates the classes, so training must as well.
    #[test]
    fn one_dimensional_separable() {
        let pos = vec![vec![1.0]; 5];
        let neg = vec![vec![-1.0]; 5];
        let data = TrainingSet::from_classes(&pos, &neg).unwrap();
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for wi in -100..=100 {
            for bi in -20..=20 {
                let p = LogRegParams {
                    weights: vec![wi as f64 * 0.1],
                    bias: bi as f64 * 0.1,
                };
                let (l, _) = loss_and_gradient(&p, &data);
                if l < best.0 {
                    best = (l, wi as f64 * 0.1, bi as f64 * 0.1);
                }
            }
        }
        let oracle = LogRegParams {
            weights: vec![best.1],
            bias: best.2,
        };
        assert!(oracle.predict(&[1.0]) > 0.9 && oracle.predict(&[-1.0]) < 0.1);

        let mut config = TrainConfig::default();
        config.adam.learning_rate = 0.01;
        let trained = train_logreg(&pos, &neg, &config).unwrap();
        assert!(trained.predict(&[1.0]) > 0.9, "{}", trained.predict(&[1.0]));
        assert!(trained.predict(&[-1.0]) < 0.1);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let data = TrainingSet::from_classes(&xs[..6], &xs[6..]).unwrap();
        for _ in 0..10 {
            let flat: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (_, grad) = loss_and_gradient(&LogRegParams::from_flat(&flat), &data);
            let h = 1e-5;
            for i in 0..flat.len() {
                let mut up = flat.clone();
                up[i] += h;
                let mut dn = flat.clone();
                dn[i] -= h;
                let fd = (loss_and_gradient(&LogRegParams::from_flat(&up), &data).0
                    - loss_and_gradient(&LogRegParams::from_flat(&dn), &data).0)
                    / (2.0 * h);
                let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8);
                assert!(rel < 1e-4, "param {i}: {fd} vs {}", grad[i]);
            }
        }
    }

    #[test]
    fn strong_l1_zeroes_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows = |rng: &mut ChaCha8Rng, n| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| (0..20).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect()
        };
        let pos = rows(&mut rng, 20);
        let neg = rows(&mut rng, 20);
        let config = TrainConfig {
            l1_lambda: 1.0,
            ..TrainConfig::default()
        };
        let p = train_logreg(&pos, &neg, &config).unwrap();
        let zeros = p.weights.iter().filter(|w| **w == 0.0).count();
        assert!(zeros as f64 >= 0.9 * p.weights.len() as f64, "{zeros} zeros");
    }

    #[test]
    fn training_is_deterministic() {
        let pos = vec![vec![0.3, 1.0], vec![0.5, 0.8]];
        let neg = vec![vec![-0.2, 0.1], vec![0.0, -0.4]];
        let c = TrainConfig {
            max_epochs: 300,
            ..TrainConfig::default()
        };
        assert_eq!(
            train_logreg(&pos, &neg, &c).unwrap(),
            train_logreg(&pos, &neg, &c).unwrap()
        );
    }
}
