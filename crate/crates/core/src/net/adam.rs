//! Adam with bias correction, plus exponential smoothing of target networks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::mlp::{Gradients, MlpParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

impl AdamState {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: vec![0.0; params.num_params()],
            second_moment: vec![0.0; params.num_params()],
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// One descent step on `params` along `grads`.
    ///
    /// A non-finite gradient leaves both the parameters and the optimizer state
    /// untouched and reports divergence.
    pub fn step(&mut self, params: &mut MlpParams, grads: &Gradients) -> Result<()> {
        if grads.layer_sizes() != params.layer_sizes() || self.first_moment.len() != params.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "adam: gradients for {:?}, parameters {:?}, state of {} entries",
                grads.layer_sizes(),
                params.layer_sizes(),
                self.first_moment.len()
            )));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let values = params.values_mut();
        for (((p, &g), m), v) in values
            .iter_mut()
            .zip(grads.values())
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        if values.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("parameters after adam step".into()));
        }
        Ok(())
    }
}

/// `target <- rho * target + (1 - rho) * source`, entrywise.
pub fn polyak_update(target: &mut MlpParams, source: &MlpParams, rho: f64) -> Result<()> {
    if !target.same_shape(source) {
        return Err(Error::ShapeMismatch(format!(
            "polyak: target {:?} vs source {:?}",
            target.layer_sizes(),
            source.layer_sizes()
        )));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::OutOfRange(format!("polyak coefficient {rho} outside [0, 1]")));
    }
    for (t, s) in target.values_mut().iter_mut().zip(source.values()) {
        *t = rho * *t + (1.0 - rho) * s;
    }
    Ok(())
}
