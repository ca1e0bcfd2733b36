use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, MlpNetwork};
use crate::error::{HommError, Result};

/// Adam with bias correction, over the flattened parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64, n_params: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: vec![0.0; n_params],
            second: vec![0.0; n_params],
        }
    }

    pub fn for_network(learning_rate: f64, net: &MlpNetwork) -> Self {
        Self::new(learning_rate, net.n_params())
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update in place on the flat parameter slice.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(HommError::DimensionMismatch {
                context: "optimizer parameter count",
                expected: self.first.len(),
                actual: grads.len(),
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(HommError::NonFinite(format!("gradient entry {i}")));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }

    /// One optimizer step on `net`.
    pub fn step(&mut self, net: &mut MlpNetwork, grads: &Gradients) -> Result<()> {
        let mut params = net.params();
        self.update(&mut params, &grads.flatten())?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(HommError::NonFinite("parameters after optimizer step".into()));
        }
        net.set_params(&params)
    }
}
