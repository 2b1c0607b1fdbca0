use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::spectral::{ParamGradient, SpectralModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        Self::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer moments over the flattened parameter vector.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub step: u32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, num_parameters: usize) -> Self {
        Self {
            kind,
            learning_rate,
            step: 0,
            m: vec![0.0; num_parameters],
            v: vec![0.0; num_parameters],
        }
    }
}

/// Applies one Adam or SGD update to every parameter block.
pub fn optimizer_step(
    params: &SpectralModelParams,
    grads: &ParamGradient,
    state: &mut OptimizerState,
) -> Result<SpectralModelParams> {
    let mut theta = params.to_flat();
    let g = grads.to_flat();
    check_len("gradient length", theta.len(), g.len())?;
    check_len("optimizer state length", theta.len(), state.m.len())?;
    state.step += 1;
    let lr = state.learning_rate;
    match state.kind {
        OptimizerKind::Sgd => {
            for (t, gi) in theta.iter_mut().zip(&g) {
                *t -= lr * gi;
            }
        }
        OptimizerKind::Adam { beta1, beta2, eps } => {
            let bc1 = 1.0 - beta1.powi(state.step as i32);
            let bc2 = 1.0 - beta2.powi(state.step as i32);
            for i in 0..theta.len() {
                state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g[i];
                state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = state.m[i] / bc1;
                let v_hat = state.v[i] / bc2;
                theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
    params.with_flat(&theta)
}
