//! Nesterov-accelerated Adam.

use serde::{Deserialize, Serialize};

use super::model::Weights;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NadamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for NadamConfig {
    fn default() -> Self {
        Self {
            lr: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NadamState {
    pub config: NadamConfig,
    pub step: u64,
    first_moment: Weights,
    second_moment: Weights,
}

impl NadamState {
    pub fn new(config: NadamConfig, like: &Weights) -> Self {
        Self {
            config,
            step: 0,
            first_moment: like.zeros_like(),
            second_moment: like.zeros_like(),
        }
    }
}

/// One update. With `t` the new step count:
///
/// ```text
/// m ← β1·m + (1−β1)·g          v ← β2·v + (1−β2)·g²
/// m̂ = β1·m / (1−β1^(t+1)) + (1−β1)·g / (1−β1^t)
/// v̂ = v / (1−β2^t)
/// θ ← θ − lr · m̂ / (√v̂ + ε)
/// ```
pub fn nadam_update(state: &mut NadamState, params: &mut Weights, grads: &Weights) {
    state.step += 1;
    let NadamConfig { lr, beta1, beta2, epsilon } = state.config;
    let t = state.step as i32;
    let m_corr_next = 1.0 - beta1.powi(t + 1);
    let m_corr = 1.0 - beta1.powi(t);
    let v_corr = 1.0 - beta2.powi(t);

    let g_all = grads.tensors();
    let mut m_all = state.first_moment.tensors_mut();
    let mut v_all = state.second_moment.tensors_mut();
    for (((name, theta), (_, _, g)), ((_, m), (_, v))) in params
        .tensors_mut()
        .into_iter()
        .zip(&g_all)
        .zip(m_all.iter_mut().zip(v_all.iter_mut()))
    {
        debug_assert_eq!(theta.len(), g.len(), "{name}");
        for (((p, &g), m), v) in theta.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = beta1 * *m / m_corr_next + (1.0 - beta1) * g / m_corr;
            let v_hat = *v / v_corr;
            *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}
