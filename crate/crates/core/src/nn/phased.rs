//! Time-gated (phased) LSTM cell for irregularly sampled sequences.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cell::{step_forward, LstmCellParams};

/// Leak of the closed phase while training; evaluation uses zero.
pub const DEFAULT_ALPHA_TRAIN: f64 = 0.001;
pub const DEFAULT_R_ON: f64 = 0.05;

/// Openness of a periodic time gate at time `t`.
///
/// With `φ = ((t − s) mod τ) / τ` the gate rises linearly from 0 to 1 over the
/// first half of the open phase, falls back over the second half, and leaks
/// `alpha · φ` while closed.
pub fn time_gate(t: f64, tau: f64, r_on: f64, shift: f64, alpha: f64) -> f64 {
    let phi = (t - shift).rem_euclid(tau) / tau;
    if phi < 0.5 * r_on {
        2.0 * phi / r_on
    } else if phi < r_on {
        2.0 - 2.0 * phi / r_on
    } else {
        alpha * phi
    }
}

/// Per-unit gate parameters of one phased layer. Not trained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGateParams {
    pub tau: Vec<f64>,
    pub shift: Vec<f64>,
    pub r_on: Vec<f64>,
    pub alpha_train: f64,
}

impl TimeGateParams {
    /// Periods log-uniform over `[1, span]`, shifts uniform over one period.
    pub fn sample<R: Rng>(hidden: usize, span: f64, rng: &mut R) -> Self {
        let hi = span.max(1.0).ln();
        let tau: Vec<f64> = (0..hidden)
            .map(|_| if hi > 0.0 { rng.random_range(0.0..hi).exp() } else { 1.0 })
            .collect();
        let shift = tau.iter().map(|&p| rng.random_range(0.0..p)).collect();
        Self {
            tau,
            shift,
            r_on: vec![DEFAULT_R_ON; hidden],
            alpha_train: DEFAULT_ALPHA_TRAIN,
        }
    }

    /// Every unit open with the same constant parameters.
    pub fn uniform(hidden: usize, tau: f64, shift: f64, r_on: f64) -> Self {
        Self {
            tau: vec![tau; hidden],
            shift: vec![shift; hidden],
            r_on: vec![r_on; hidden],
            alpha_train: DEFAULT_ALPHA_TRAIN,
        }
    }

    pub fn hidden(&self) -> usize {
        self.tau.len()
    }

    pub fn validate(&self) -> bool {
        self.tau.iter().all(|t| *t > 0.0)
            && self.r_on.iter().all(|r| *r > 0.0 && *r <= 1.0)
            && self.alpha_train >= 0.0
            && self.shift.len() == self.tau.len()
            && self.r_on.len() == self.tau.len()
    }

    /// Gate values `[batch × hidden]` for one timestamp per sample.
    pub fn openness(&self, times: ArrayView1<f64>, alpha: f64) -> Array2<f64> {
        Array2::from_shape_fn((times.len(), self.hidden()), |(b, j)| {
            time_gate(times[b], self.tau[j], self.r_on[j], self.shift[j], alpha)
        })
    }
}

/// Single-sample phased step with an explicit gate vector `k`.
pub fn phased_step_with_gate(
    params: &LstmCellParams,
    x: ArrayView1<f64>,
    k: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
    c_prev: ArrayView1<f64>,
) -> (Array1<f64>, Array1<f64>) {
    assert_eq!(k.len(), params.hidden(), "gate width");
    let k = k.insert_axis(Axis(0)).to_owned();
    let (h, c, _) = step_forward(params, x.insert_axis(Axis(0)), h_prev.insert_axis(Axis(0)), c_prev.insert_axis(Axis(0)), Some(k));
    (h.row(0).to_owned(), c.row(0).to_owned())
}

/// Single-sample phased step at time `t`; returns `(h_j, c_j)`.
pub fn phased_step(
    params: &LstmCellParams,
    gates: &TimeGateParams,
    x: ArrayView1<f64>,
    t: f64,
    alpha: f64,
    h_prev: ArrayView1<f64>,
    c_prev: ArrayView1<f64>,
) -> (Array1<f64>, Array1<f64>) {
    let k = gates.openness(ndarray::aview1(&[t]), alpha);
    phased_step_with_gate(params, x, k.row(0), h_prev, c_prev)
}
