use serde::{Deserialize, Serialize};

use crate::error::{PastelError, Result};
use crate::numerics::Matrix;

/// Hyperparameters of the adaptive-moment optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adaptive-moment optimizer state for an ordered list of parameters.
///
/// A second-moment decay of exactly 0 disables the adaptive denominator, so
/// with both decays at 0 a step is plain gradient descent `p ← p − lr·g`.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    config: AdamConfig,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, shapes: &[(usize, usize)]) -> Self {
        Self {
            config,
            step: 0,
            first: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
            second: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update. `params[k].0` names the parameter for error
    /// reporting; `grads[k]` must match `params[k].1` in shape.
    pub fn step(&mut self, params: &mut [(&str, &mut Matrix)], grads: &[Matrix]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(PastelError::ShapeMismatch(format!(
                "optimizer tracks {} parameters, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (k, ((name, p), g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || self.first[k].shape() != g.shape() {
                return Err(PastelError::ShapeMismatch(format!(
                    "parameter `{name}` is {:?}, gradient is {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
            if !g.is_finite() {
                return Err(PastelError::NonFiniteGradient((*name).to_string()));
            }
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let adaptive = beta2 > 0.0;

        for (k, ((_, p), g)) in params.iter_mut().zip(grads).enumerate() {
            let m = self.first[k].data_mut();
            let v = self.second[k].data_mut();
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let update = if adaptive {
                    m_hat / ((*vi / bc2).sqrt() + eps)
                } else {
                    m_hat
                };
                *pi -= lr * update;
            }
        }
        Ok(())
    }
}
