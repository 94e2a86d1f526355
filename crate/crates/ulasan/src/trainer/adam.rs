//! Adam with bias correction over the flat parameter buffer. Moments are
//! kept in `f64`; parameters stay `f32`.

use super::TrainerError;
use crate::encoder::EncoderParams;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl AdamState {
    /// Fresh state for `n` parameters with the standard β1/β2/ε defaults.
    pub fn new(n: usize) -> AdamState {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }

    /// Number of steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// One update: m←β1m+(1−β1)g, v←β2v+(1−β2)g², θ←θ−lr·m̂/(√v̂+ε) with
/// bias-corrected m̂=m/(1−β1ᵗ), v̂=v/(1−β2ᵗ).
pub fn adam_step(
    params: &mut EncoderParams,
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), TrainerError> {
    if grads.len() != params.param_count() || state.len() != params.param_count() {
        return Err(TrainerError::BadConfig(format!(
            "shape mismatch: {} params, {} grads, {} moments",
            params.param_count(),
            grads.len(),
            state.len()
        )));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(TrainerError::BadConfig(format!("learning rate {lr} invalid")));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(TrainerError::NonFiniteGradient);
    }
    state.t += 1;
    let bias1 = 1.0 - state.beta1.powi(state.t as i32);
    let bias2 = 1.0 - state.beta2.powi(state.t as i32);
    for (i, value) in params.values_mut().iter_mut().enumerate() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bias1;
        let v_hat = state.v[i] / bias2;
        *value = (*value as f64 - lr * m_hat / (v_hat.sqrt() + state.eps)) as f32;
    }
    Ok(())
}
