//! Full-batch adam with bias-corrected moment estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update in place. A non-finite gradient aborts without touching
    /// either the parameters or the moments.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], config: &AdamConfig) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                found: if params.len() != self.m.len() {
                    params.len()
                } else {
                    grads.len()
                },
            });
        }
        if let Some((i, g)) = grads.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient component {i} is {g} at adam step {}",
                self.t + 1
            )));
        }
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - config.beta1.powi(t);
        let bc2 = 1.0 - config.beta2.powi(t);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = config.beta1 * *m + (1.0 - config.beta1) * g;
            *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        s.step(&mut p, &[0.0; 3], &AdamConfig::default()).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    /// Closed form for a constant gradient g: m_hat = g and v_hat = g^2 at every step,
    /// so each update is lr * g / (|g| + eps).
    #[test]
    fn constant_gradient_steps_approach_lr_sign() {
        let cfg = AdamConfig::default();
        for g in [0.3, -4.0, 1e-3] {
            let mut s = AdamState::new(1);
            let mut p = [0.0];
            let mut prev = 0.0;
            for _ in 0..500 {
                s.step(&mut p, &[g], &cfg).unwrap();
                let step = p[0] - prev;
                prev = p[0];
                let expected = -cfg.learning_rate * g / (g.abs() + cfg.eps);
                assert!((step - expected).abs() < 1e-12, "{step} vs {expected}");
            }
            assert!((prev / 500.0 + cfg.learning_rate * g.signum()).abs() < 1e-7);
        }
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut s = AdamState::new(2);
        let mut p = vec![1.0, 1.0];
        let err = s.step(&mut p, &[0.1, f64::NAN], &AdamConfig::default());
        assert!(matches!(err, Err(Error::NonFinite(_))));
        assert_eq!(p, vec![1.0, 1.0]);
        assert_eq!(s.steps(), 0);
    }

    #[test]
    fn deterministic_trajectory() {
        let run = || {
            let mut s = AdamState::new(2);
            let mut p = vec![0.2, -0.1];
            for k in 0..50 {
                let g = [p[0] * 2.0 + k as f64 * 0.01, p[1].sin()];
                s.step(&mut p, &g, &AdamConfig::default()).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
