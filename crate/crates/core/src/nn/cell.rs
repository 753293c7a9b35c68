//! Peephole LSTM cell, batched forward and backward steps.
//!
//! Gate pre-activations are packed along the last axis in the order
//! input, forget, candidate, output (`i, f, c, o`), each `hidden` wide:
//!
//! ```text
//! i  = σ(x W_xi + h W_hi + w_ci ⊙ c_prev + b_i)
//! f  = σ(x W_xf + h W_hf + w_cf ⊙ c_prev + b_f)
//! c  = f ⊙ c_prev + i ⊙ tanh(x W_xc + h W_hc + b_c)
//! o  = σ(x W_xo + h W_ho + w_co ⊙ c + b_o)
//! h  = o ⊙ tanh(c)
//! ```
//!
//! A time gate `k` (phased cells) blends the fresh state with the previous one:
//! `c ← k ⊙ c + (1 − k) ⊙ c_prev`, `h ← k ⊙ h + (1 − k) ⊙ h_prev`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

pub const GATES: usize = 4;

/// Row of [`LstmCellParams::peephole`] holding each peephole vector.
pub const PEEP_I: usize = 0;
pub const PEEP_F: usize = 1;
pub const PEEP_O: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct LstmCellParams {
    /// `[input_dim × 4·hidden]`
    pub w_x: Array2<f64>,
    /// `[hidden × 4·hidden]`
    pub w_h: Array2<f64>,
    /// `[3 × hidden]`, rows `w_ci, w_cf, w_co`.
    pub peephole: Array2<f64>,
    /// `[4·hidden]`
    pub bias: Array1<f64>,
}

impl LstmCellParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            w_x: Array2::zeros((input_dim, GATES * hidden)),
            w_h: Array2::zeros((hidden, GATES * hidden)),
            peephole: Array2::zeros((3, hidden)),
            bias: Array1::zeros(GATES * hidden),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w_h.nrows()
    }

    /// Columns of gate `g` (0 = i, 1 = f, 2 = c, 3 = o).
    pub fn gate_cols(&self, g: usize) -> std::ops::Range<usize> {
        let h = self.hidden();
        g * h..(g + 1) * h
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intermediate values of one batched step, kept for backpropagation.
#[derive(Clone, Debug)]
pub(crate) struct StepCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    c_tilde: Array2<f64>,
    tanh_c: Array2<f64>,
    k: Option<Array2<f64>>,
}

/// One batched step. Rows of `x`, `h_prev`, `c_prev` (and `k`) are samples.
pub(crate) fn step_forward(
    p: &LstmCellParams,
    x: ArrayView2<f64>,
    h_prev: ArrayView2<f64>,
    c_prev: ArrayView2<f64>,
    k: Option<Array2<f64>>,
) -> (Array2<f64>, Array2<f64>, StepCache) {
    let hsz = p.hidden();
    let mut a = x.dot(&p.w_x);
    general_mat_mul(1.0, &h_prev, &p.w_h, 1.0, &mut a);
    a += &p.bias;

    let peep_i = p.peephole.row(PEEP_I);
    let peep_f = p.peephole.row(PEEP_F);
    let peep_o = p.peephole.row(PEEP_O);

    let mut i = a.slice(s![.., 0..hsz]).to_owned();
    i.zip_mut_with(&(&c_prev * &peep_i), |a, b| *a = sigmoid(*a + b));
    let mut f = a.slice(s![.., hsz..2 * hsz]).to_owned();
    f.zip_mut_with(&(&c_prev * &peep_f), |a, b| *a = sigmoid(*a + b));
    let g = a.slice(s![.., 2 * hsz..3 * hsz]).mapv(f64::tanh);
    let c_tilde = &f * &c_prev + &i * &g;
    let mut o = a.slice(s![.., 3 * hsz..]).to_owned();
    o.zip_mut_with(&(&c_tilde * &peep_o), |a, b| *a = sigmoid(*a + b));
    let tanh_c = c_tilde.mapv(f64::tanh);
    let h_tilde = &o * &tanh_c;

    let (h, c) = match &k {
        None => (h_tilde, c_tilde.clone()),
        Some(k) => {
            let keep = k.mapv(|v| 1.0 - v);
            (k * &h_tilde + &keep * &h_prev, k * &c_tilde + &keep * &c_prev)
        }
    };
    let cache = StepCache {
        x: x.to_owned(),
        h_prev: h_prev.to_owned(),
        c_prev: c_prev.to_owned(),
        i,
        f,
        g,
        o,
        c_tilde,
        tanh_c,
        k,
    };
    (h, c, cache)
}

/// Backpropagates `dh`, `dc` (gradients w.r.t. this step's outputs) through
/// one step, accumulating parameter gradients into `grads`. Returns
/// `(dx, dh_prev, dc_prev)`.
pub(crate) fn step_backward(
    p: &LstmCellParams,
    cache: &StepCache,
    dh: &Array2<f64>,
    dc: &Array2<f64>,
    grads: &mut LstmCellParams,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let hsz = p.hidden();
    let batch = dh.nrows();

    let (dh_tilde, mut dc_tilde, mut dh_prev, mut dc_prev) = match &cache.k {
        None => (dh.clone(), dc.clone(), Array2::zeros((batch, hsz)), Array2::zeros((batch, hsz))),
        Some(k) => {
            let keep = k.mapv(|v| 1.0 - v);
            (k * dh, k * dc, &keep * dh, &keep * dc)
        }
    };

    // h̃ = o ⊙ tanh(c̃)
    let d_o = &dh_tilde * &cache.tanh_c;
    dc_tilde += &(&dh_tilde * &cache.o * &cache.tanh_c.mapv(|t| 1.0 - t * t));
    let da_o = &d_o * &cache.o.mapv(|v| v * (1.0 - v));
    dc_tilde += &(&da_o * &p.peephole.row(PEEP_O));

    // c̃ = f ⊙ c_prev + i ⊙ g
    let d_f = &dc_tilde * &cache.c_prev;
    dc_prev += &(&dc_tilde * &cache.f);
    let d_i = &dc_tilde * &cache.g;
    let d_g = &dc_tilde * &cache.i;

    let da_i = &d_i * &cache.i.mapv(|v| v * (1.0 - v));
    let da_f = &d_f * &cache.f.mapv(|v| v * (1.0 - v));
    let da_g = &d_g * &cache.g.mapv(|v| 1.0 - v * v);
    dc_prev += &(&da_i * &p.peephole.row(PEEP_I));
    dc_prev += &(&da_f * &p.peephole.row(PEEP_F));

    {
        let mut gp = grads.peephole.row_mut(PEEP_I);
        gp += &(&da_i * &cache.c_prev).sum_axis(Axis(0));
    }
    {
        let mut gp = grads.peephole.row_mut(PEEP_F);
        gp += &(&da_f * &cache.c_prev).sum_axis(Axis(0));
    }
    {
        let mut gp = grads.peephole.row_mut(PEEP_O);
        gp += &(&da_o * &cache.c_tilde).sum_axis(Axis(0));
    }

    let mut da = Array2::zeros((batch, GATES * hsz));
    da.slice_mut(s![.., 0..hsz]).assign(&da_i);
    da.slice_mut(s![.., hsz..2 * hsz]).assign(&da_f);
    da.slice_mut(s![.., 2 * hsz..3 * hsz]).assign(&da_g);
    da.slice_mut(s![.., 3 * hsz..]).assign(&da_o);

    general_mat_mul(1.0, &cache.x.t(), &da, 1.0, &mut grads.w_x);
    general_mat_mul(1.0, &cache.h_prev.t(), &da, 1.0, &mut grads.w_h);
    grads.bias += &da.sum_axis(Axis(0));

    let dx = da.dot(&p.w_x.t());
    general_mat_mul(1.0, &da, &p.w_h.t(), 1.0, &mut dh_prev);
    (dx, dh_prev, dc_prev)
}

/// Single-sample standard LSTM step; returns `(h_t, c_t)`.
pub fn lstm_step(
    params: &LstmCellParams,
    x: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
    c_prev: ArrayView1<f64>,
) -> (Array1<f64>, Array1<f64>) {
    assert_eq!(x.len(), params.input_dim(), "input width");
    assert_eq!(h_prev.len(), params.hidden(), "hidden width");
    assert_eq!(c_prev.len(), params.hidden(), "cell width");
    let (h, c, _) = step_forward(params, x.insert_axis(Axis(0)), h_prev.insert_axis(Axis(0)), c_prev.insert_axis(Axis(0)), None);
    (h.row(0).to_owned(), c.row(0).to_owned())
}
