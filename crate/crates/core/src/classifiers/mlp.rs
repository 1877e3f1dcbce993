//! One hidden layer of three tanh units under a sigmoid output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{bce_with_logit, require_both_classes, sigmoid, AdamState, TrainConfig, TrainingSet};
use crate::error::Result;
use crate::seed;

/// Hidden units per word classifier.
pub const HIDDEN: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    /// `HIDDEN × dim`, row-major.
    pub w1: Vec<f64>,
    pub b1: [f64; HIDDEN],
    pub w2: [f64; HIDDEN],
    pub b2: f64,
}

impl MlpParams {
    pub fn zeros(dim: usize) -> Self {
        MlpParams {
            w1: vec![0.0; HIDDEN * dim],
            b1: [0.0; HIDDEN],
            w2: [0.0; HIDDEN],
            b2: 0.0,
        }
    }

    /// Glorot-uniform weights, zero biases. The stream depends only on `seed`, so every
    /// word trained under one config starts from the same point.
    pub fn init(dim: usize, seed: u64) -> Self {
        let mut rng = seed::stream(seed, "mlp-init");
        let r1 = (6.0 / (dim + HIDDEN) as f64).sqrt();
        let r2 = (6.0 / (HIDDEN + 1) as f64).sqrt();
        let w1 = (0..HIDDEN * dim).map(|_| rng.random_range(-r1..=r1)).collect();
        let mut w2 = [0.0; HIDDEN];
        w2.iter_mut().for_each(|w| *w = rng.random_range(-r2..=r2));
        MlpParams {
            w1,
            b1: [0.0; HIDDEN],
            w2,
            b2: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.w1.len() / HIDDEN
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + 2 * HIDDEN + 1
    }

    pub fn hidden_row(&self, unit: usize) -> &[f64] {
        let d = self.dim();
        &self.w1[unit * d..(unit + 1) * d]
    }

    pub fn hidden(&self, x: &[f64]) -> [f64; HIDDEN] {
        let mut h = [0.0; HIDDEN];
        for (k, hk) in h.iter_mut().enumerate() {
            let pre: f64 = self.hidden_row(k).iter().zip(x).map(|(w, v)| w * v).sum();
            *hk = (pre + self.b1[k]).tanh();
        }
        h
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let h = self.hidden(x);
        h.iter().zip(&self.w2).map(|(a, b)| a * b).sum::<f64>() + self.b2
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// `[w1..., b1..., w2..., b2]`
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn from_flat(dim: usize, flat: &[f64]) -> Self {
        let n = HIDDEN * dim;
        let mut b1 = [0.0; HIDDEN];
        b1.copy_from_slice(&flat[n..n + HIDDEN]);
        let mut w2 = [0.0; HIDDEN];
        w2.copy_from_slice(&flat[n + HIDDEN..n + 2 * HIDDEN]);
        MlpParams {
            w1: flat[..n].to_vec(),
            b1,
            w2,
            b2: flat[n + 2 * HIDDEN],
        }
    }

    fn squared_weights(&self) -> f64 {
        self.w1.iter().chain(&self.w2).map(|w| w * w).sum()
    }
}

/// Mean cross-entropy plus `l2_alpha / (2n) · Σ w²` (biases excluded), and its gradient in
/// the [`MlpParams::to_flat`] layout.
pub fn loss_and_gradient(params: &MlpParams, data: &TrainingSet, l2_alpha: f64) -> (f64, Vec<f64>) {
    let d = params.dim();
    let n = data.len() as f64;
    let (o_b1, o_w2, o_b2) = (HIDDEN * d, HIDDEN * d + HIDDEN, HIDDEN * d + 2 * HIDDEN);
    let mut grad = vec![0.0; params.n_params()];
    let mut loss = 0.0;
    for (x, &y) in data.xs.iter().zip(&data.ys) {
        let h = params.hidden(x);
        let z = h.iter().zip(&params.w2).map(|(a, b)| a * b).sum::<f64>() + params.b2;
        loss += bce_with_logit(z, y);
        let dz = (sigmoid(z) - y) / n;
        grad[o_b2] += dz;
        for k in 0..HIDDEN {
            grad[o_w2 + k] += dz * h[k];
            let dpre = dz * params.w2[k] * (1.0 - h[k] * h[k]);
            grad[o_b1 + k] += dpre;
            for (g, v) in grad[k * d..(k + 1) * d].iter_mut().zip(x) {
                *g += dpre * v;
            }
        }
    }
    let scale = l2_alpha / n;
    for (g, w) in grad[..o_b1].iter_mut().zip(&params.w1) {
        *g += scale * w;
    }
    for k in 0..HIDDEN {
        grad[o_w2 + k] += scale * params.w2[k];
    }
    (loss / n + 0.5 * scale * params.squared_weights(), grad)
}

/// Resumes adam training from `params` with fresh optimizer moments.
pub fn continue_training(params: &MlpParams, data: &TrainingSet, config: &TrainConfig) -> Result<MlpParams> {
    let d = params.dim();
    let mut flat = params.to_flat();
    let mut adam = AdamState::new(flat.len());
    let mut prev: Option<f64> = None;
    for _ in 0..config.max_epochs {
        let (loss, grad) = loss_and_gradient(&MlpParams::from_flat(d, &flat), data, config.l2_alpha);
        if let Some(p) = prev {
            if (p - loss).abs() < config.convergence_tol {
                break;
            }
        }
        prev = Some(loss);
        adam.step(&mut flat, &grad, &config.adam)?;
    }
    Ok(MlpParams::from_flat(d, &flat))
}

pub fn train_mlp(positives: &[Vec<f64>], negatives: &[Vec<f64>], config: &TrainConfig) -> Result<MlpParams> {
    require_both_classes(positives, negatives)?;
    let data = TrainingSet::from_classes(positives, negatives)?;
    continue_training(&MlpParams::init(data.dim, config.seed), &data, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::train_logreg;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_predict_half() {
        assert_eq!(MlpParams::zeros(5).predict(&[1.0, 2.0, -1.0, 0.0, 9.0]), 0.5);
    }

    #[test]
    fn flat_layout_roundtrip() {
        let p = MlpParams::init(4, 3);
        assert_eq!(MlpParams::from_flat(4, &p.to_flat()), p);
        assert_eq!(p.n_params(), 12 + 7);
        let r = (6.0f64 / 7.0).sqrt();
        assert!(p.w1.iter().all(|w| w.abs() <= r));
        assert_eq!(p.b1, [0.0; HIDDEN]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let d = 4;
        let xs: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let data = TrainingSet::from_classes(&xs[..4], &xs[4..]).unwrap();
        for _ in 0..10 {
            let flat: Vec<f64> = (0..HIDDEN * d + 2 * HIDDEN + 1)
                .map(|_| rng.random_range(-1.5..1.5))
                .collect();
            let loss = |f: &[f64]| loss_and_gradient(&MlpParams::from_flat(d, f), &data, 0.1).0;
            let (_, grad) = loss_and_gradient(&MlpParams::from_flat(d, &flat), &data, 0.1);
            let h = 1e-5;
            for i in 0..flat.len() {
                let mut up = flat.clone();
                up[i] += h;
                let mut dn = flat.clone();
                dn[i] -= h;
                let fd = (loss(&up) - loss(&dn)) / (2.0 * h);
                let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8);
                assert!(rel < 1e-4, "param {i}: {fd} vs {}", grad[i]);
            }
        }
    }

    fn xor() -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let pos = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let neg = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        (pos, neg)
    }

    fn accuracy(predict: impl Fn(&[f64]) -> f64) -> f64 {
        let (pos, neg) = xor();
        let hits = pos.iter().filter(|x| predict(x) > 0.5).count() + neg.iter().filter(|x| predict(x) <= 0.5).count();
        hits as f64 / 4.0
    }

    #[test]
    fn fits_xor_where_logreg_cannot() {
        let (pos, neg) = xor();
        let config = TrainConfig {
            adam: crate::classifiers::AdamConfig {
                learning_rate: 0.05,
                ..Default::default()
            },
            l2_alpha: 0.0,
            max_epochs: 5000,
            ..TrainConfig::default()
        };
        let lr = train_logreg(&pos, &neg, &config).unwrap();
        assert!(accuracy(|x| lr.predict(x)) <= 0.6);
        let mlp = train_mlp(&pos, &neg, &config).unwrap();
        assert_eq!(accuracy(|x| mlp.predict(x)), 1.0);
    }

    #[test]
    fn zero_epochs_keeps_params() {
        let p = MlpParams::init(2, 1);
        let (pos, neg) = xor();
        let data = TrainingSet::from_classes(&pos, &neg).unwrap();
        let config = TrainConfig {
            max_epochs: 0,
            ..TrainConfig::default()
        };
        assert_eq!(continue_training(&p, &data, &config).unwrap(), p);
    }
}
