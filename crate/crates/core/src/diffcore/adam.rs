//! Adam with bias-corrected moment estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    /// `lr = 1e-4`, `β1 = 0.9`, `β2 = 0.999`, `ε = 1e-8`.
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        // Negated so NaN is rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Optimizer state: one first/second moment buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl Adam {
    /// `shapes` holds the length of every parameter tensor, in the order
    /// they will be passed to [`Adam::step`].
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step: 0,
            first_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != self.first_moment.len() {
            return Err(Error::DimensionMismatch(format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, ((p, g), m)) in params.iter().zip(grads).zip(&self.first_moment).enumerate() {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::DimensionMismatch(format!(
                    "tensor {i}: state has {} entries, parameter {}, gradient {}",
                    m.len(),
                    p.len(),
                    g.len()
                )));
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let correction1 = 1.0 - beta1.powi(t);
        let correction2 = 1.0 - beta2.powi(t);

        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(
            self.first_moment
                .iter_mut()
                .zip(self.second_moment.iter_mut()),
        ) {
            for j in 0..p.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = m[j] / correction1;
                let v_hat = v[j] / correction2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
