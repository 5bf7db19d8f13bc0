//! Adam and the exponential learning-rate schedule.

use crate::error::{AdError, AdResult};
use crate::nn::ParamSet;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates, one tensor per parameter, and the step count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> AdamState {
        let zeros: Vec<Tensor> = params.tensors().iter().map(|t| Tensor::zeros(t.dims())).collect();
        AdamState { m: zeros.clone(), v: zeros, t: 0 }
    }
}

/// One bias-corrected Adam update applied in place.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &[Tensor],
    state: &mut AdamState,
    lr: f64,
    cfg: &AdamConfig,
) -> AdResult<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(AdError::Shape(format!(
            "{} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((p, g), m) in params.tensors().iter().zip(grads).zip(&state.m) {
        if p.dims() != g.dims() || p.dims() != m.dims() {
            return Err(AdError::Shape(format!("param {:?}, grad {:?}, state {:?}", p.dims(), g.dims(), m.dims())));
        }
    }
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for (i, p) in params.tensors_mut().iter_mut().enumerate() {
        let g = grads[i].data();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (j, x) in p.data_mut().iter_mut().enumerate() {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            let mh = m[j] / bc1;
            let vh = v[j] / bc2;
            *x -= lr * mh / (vh.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// `lr0 · decay^epoch`.
pub fn exp_decay_lr(lr0: f64, decay: f64, epoch: usize) -> f64 {
    assert!(decay > 0.0 && decay <= 1.0, "decay must lie in (0, 1], got {decay}");
    lr0 * decay.powi(epoch as i32)
}
