//! Bidirectional stacked encoder with an affine output head.
//!
//! The forward stack reads the left context oldest-first, the backward stack
//! reads the right context newest-first. Their final top-layer states are
//! concatenated, passed through inverted dropout and mapped to one scalar.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::cell::{step_backward, step_forward, LstmCellParams, StepCache};
use super::phased::TimeGateParams;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    #[default]
    Standard,
    Phased,
}

impl std::str::FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(CellKind::Standard),
            "phased" => Ok(CellKind::Phased),
            other => Err(Error::Config(format!("unknown cell kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub cell: CellKind,
}

impl ModelShape {
    pub fn standard(hidden: usize) -> Self {
        Self {
            input_dim: 1,
            hidden,
            layers: 2,
            cell: CellKind::Standard,
        }
    }

    pub fn concat_dim(&self) -> usize {
        2 * self.hidden
    }

    fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim
        } else {
            self.hidden
        }
    }
}

/// Everything the optimizer updates. Also used as the gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    pub forward: Vec<LstmCellParams>,
    pub backward: Vec<LstmCellParams>,
    /// `[2·hidden]`, forward half first.
    pub head_weight: Array1<f64>,
    /// `[1]`
    pub head_bias: Array1<f64>,
}

impl Weights {
    pub fn zeros(shape: &ModelShape) -> Self {
        let stack = || {
            (0..shape.layers)
                .map(|l| LstmCellParams::zeros(shape.layer_input(l), shape.hidden))
                .collect::<Vec<_>>()
        };
        Self {
            forward: stack(),
            backward: stack(),
            head_weight: Array1::zeros(shape.concat_dim()),
            head_bias: Array1::zeros(1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let zero = |c: &LstmCellParams| LstmCellParams::zeros(c.input_dim(), c.hidden());
        Self {
            forward: self.forward.iter().map(zero).collect(),
            backward: self.backward.iter().map(zero).collect(),
            head_weight: Array1::zeros(self.head_weight.len()),
            head_bias: Array1::zeros(1),
        }
    }

    /// Named registry of every trainable tensor, in a stable order, as
    /// `(key, shape, row-major data)`.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        for (dir, stack) in [("forward", &self.forward), ("backward", &self.backward)] {
            for (l, cell) in stack.iter().enumerate() {
                out.push((format!("{dir}.{l}.w_x"), cell.w_x.shape().to_vec(), slice(cell.w_x.as_slice())));
                out.push((format!("{dir}.{l}.w_h"), cell.w_h.shape().to_vec(), slice(cell.w_h.as_slice())));
                out.push((
                    format!("{dir}.{l}.peephole"),
                    cell.peephole.shape().to_vec(),
                    slice(cell.peephole.as_slice()),
                ));
                out.push((format!("{dir}.{l}.bias"), cell.bias.shape().to_vec(), slice(cell.bias.as_slice())));
            }
        }
        out.push(("head.weight".into(), self.head_weight.shape().to_vec(), slice(self.head_weight.as_slice())));
        out.push(("head.bias".into(), self.head_bias.shape().to_vec(), slice(self.head_bias.as_slice())));
        out
    }

    /// Mutable counterpart of [`Weights::tensors`], same order and keys.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for (dir, stack) in [("forward", &mut self.forward), ("backward", &mut self.backward)] {
            for (l, cell) in stack.iter_mut().enumerate() {
                out.push((format!("{dir}.{l}.w_x"), slice_mut(cell.w_x.as_slice_mut())));
                out.push((format!("{dir}.{l}.w_h"), slice_mut(cell.w_h.as_slice_mut())));
                out.push((format!("{dir}.{l}.peephole"), slice_mut(cell.peephole.as_slice_mut())));
                out.push((format!("{dir}.{l}.bias"), slice_mut(cell.bias.as_slice_mut())));
            }
        }
        out.push(("head.weight".into(), slice_mut(self.head_weight.as_slice_mut())));
        out.push(("head.bias".into(), slice_mut(self.head_bias.as_slice_mut())));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, _, d)| d.len()).sum()
    }

    /// Errors with the first tensor containing a non-finite entry.
    pub fn check_finite(&self, what: &str) -> Result<()> {
        for (name, _, data) in self.tensors() {
            if let Some(v) = data.iter().find(|v| !v.is_finite()) {
                return Err(Error::Numeric {
                    param: name,
                    message: format!("{what} contains {v}"),
                });
            }
        }
        Ok(())
    }
}

fn slice(s: Option<&[f64]>) -> &[f64] {
    s.expect("parameters are stored in standard layout")
}

fn slice_mut(s: Option<&mut [f64]>) -> &mut [f64] {
    s.expect("parameters are stored in standard layout")
}

/// Gate parameters of a phased model, one entry per layer and direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGates {
    pub forward: Vec<TimeGateParams>,
    pub backward: Vec<TimeGateParams>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub shape: ModelShape,
    pub weights: Weights,
    /// Present iff `shape.cell` is `Phased`.
    pub time_gates: Option<TimeGates>,
}

impl ModelParams {
    pub fn zeros(shape: ModelShape) -> Self {
        let time_gates = (shape.cell == CellKind::Phased).then(|| {
            let open = || {
                (0..shape.layers)
                    .map(|_| TimeGateParams::uniform(shape.hidden, 1.0, 0.0, 1.0))
                    .collect()
            };
            TimeGates {
                forward: open(),
                backward: open(),
            }
        });
        Self {
            shape,
            weights: Weights::zeros(&shape),
            time_gates,
        }
    }
}

/// A batch of anchor contexts, one row per sample.
///
/// `forward` holds the left context in reading order (oldest first);
/// `backward` holds the right context in reading order (newest first).
/// Time matrices are required for phased models and ignored otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextBatch {
    pub forward: Array2<f64>,
    pub backward: Array2<f64>,
    pub forward_times: Option<Array2<f64>>,
    pub backward_times: Option<Array2<f64>>,
}

impl ContextBatch {
    pub fn len(&self) -> usize {
        self.forward.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rows `idx` of the batch, in that order.
    pub fn select(&self, idx: &[usize]) -> ContextBatch {
        ContextBatch {
            forward: self.forward.select(Axis(0), idx),
            backward: self.backward.select(Axis(0), idx),
            forward_times: self.forward_times.as_ref().map(|m| m.select(Axis(0), idx)),
            backward_times: self.backward_times.as_ref().map(|m| m.select(Axis(0), idx)),
        }
    }
}

/// Dropout handling at the concatenated encoder output.
#[derive(Clone, Copy, Debug)]
pub enum HeadMode<'a> {
    /// Identity; also selects the zero closed-phase leak for phased cells.
    Eval,
    /// `keep` is a `[batch × 2·hidden]` 0/1 mask; kept units are scaled by
    /// `1 / (1 − rate)`.
    Train { keep: &'a Array2<f64>, rate: f64 },
}

impl HeadMode<'_> {
    fn training(&self) -> bool {
        matches!(self, HeadMode::Train { .. })
    }
}

struct StackTrace {
    // caches[layer][step]
    caches: Vec<Vec<StepCache>>,
    top: Array2<f64>,
}

fn run_stack(
    cells: &[LstmCellParams],
    gates: Option<&[TimeGateParams]>,
    seq: ArrayView2<f64>,
    times: Option<&Array2<f64>>,
    alpha_for: impl Fn(&TimeGateParams) -> f64,
) -> StackTrace {
    let batch = seq.nrows();
    let steps = seq.ncols();
    let hidden = cells[0].hidden();
    let mut inputs: Vec<Array2<f64>> = (0..steps)
        .map(|j| seq.column(j).to_owned().insert_axis(Axis(1)))
        .collect();
    let mut caches = Vec::with_capacity(cells.len());
    for (l, cell) in cells.iter().enumerate() {
        let mut h = Array2::zeros((batch, hidden));
        let mut c = Array2::zeros((batch, hidden));
        let mut layer_caches = Vec::with_capacity(steps);
        let mut outputs = Vec::with_capacity(steps);
        for (j, x) in inputs.iter().enumerate() {
            let k = gates.map(|g| {
                let g = &g[l];
                let t = times.expect("phased models need timestamps");
                g.openness(t.column(j), alpha_for(g))
            });
            let (h_next, c_next, cache) = step_forward(cell, x.view(), h.view(), c.view(), k);
            h = h_next;
            c = c_next;
            outputs.push(h.clone());
            layer_caches.push(cache);
        }
        caches.push(layer_caches);
        inputs = outputs;
    }
    let top = inputs
        .pop()
        .unwrap_or_else(|| Array2::zeros((batch, hidden)));
    StackTrace { caches, top }
}

/// Backpropagates a gradient on the final top-layer state through a stack.
fn backprop_stack(cells: &[LstmCellParams], trace: &StackTrace, d_top: Array2<f64>, grads: &mut [LstmCellParams]) {
    let layers = cells.len();
    let steps = trace.caches[0].len();
    if steps == 0 {
        return;
    }
    let (batch, hidden) = d_top.dim();
    // gradient w.r.t. each step's output of the layer above
    let mut d_outputs: Vec<Array2<f64>> = vec![Array2::zeros((batch, hidden)); steps];
    d_outputs[steps - 1] = d_top;
    for l in (0..layers).rev() {
        let mut dh_next = Array2::zeros((batch, hidden));
        let mut dc_next = Array2::zeros((batch, hidden));
        let mut d_inputs = Vec::with_capacity(steps);
        for j in (0..steps).rev() {
            let dh = &d_outputs[j] + &dh_next;
            let (dx, dh_prev, dc_prev) = step_backward(&cells[l], &trace.caches[l][j], &dh, &dc_next, &mut grads[l]);
            dh_next = dh_prev;
            dc_next = dc_prev;
            d_inputs.push(dx);
        }
        d_inputs.reverse();
        d_outputs = d_inputs;
    }
}

fn alpha(mode: &HeadMode<'_>) -> impl Fn(&TimeGateParams) -> f64 {
    let training = mode.training();
    move |g: &TimeGateParams| if training { g.alpha_train } else { 0.0 }
}

impl ModelParams {
    fn encode_traced(&self, batch: &ContextBatch, mode: &HeadMode<'_>) -> (StackTrace, StackTrace) {
        let gates = self.time_gates.as_ref();
        let fwd = || {
            run_stack(
                &self.weights.forward,
                gates.map(|g| g.forward.as_slice()),
                batch.forward.view(),
                batch.forward_times.as_ref(),
                alpha(mode),
            )
        };
        let bwd = || {
            run_stack(
                &self.weights.backward,
                gates.map(|g| g.backward.as_slice()),
                batch.backward.view(),
                batch.backward_times.as_ref(),
                alpha(mode),
            )
        };
        rayon::join(fwd, bwd)
    }

    /// Final top-layer states `(h_forward, h_backward)`, each `[batch × hidden]`.
    pub fn encode(&self, batch: &ContextBatch, mode: &HeadMode<'_>) -> (Array2<f64>, Array2<f64>) {
        let (f, b) = self.encode_traced(batch, mode);
        (f.top, b.top)
    }

    fn concat(&self, hf: &Array2<f64>, hb: &Array2<f64>) -> Array2<f64> {
        let hidden = self.shape.hidden;
        let mut z = Array2::zeros((hf.nrows(), 2 * hidden));
        z.slice_mut(s![.., ..hidden]).assign(hf);
        z.slice_mut(s![.., hidden..]).assign(hb);
        z
    }

    fn head_input(&self, hf: &Array2<f64>, hb: &Array2<f64>, mode: &HeadMode<'_>) -> Array2<f64> {
        let z = self.concat(hf, hb);
        match mode {
            HeadMode::Eval => z,
            HeadMode::Train { keep, rate } => z * *keep / (1.0 - rate),
        }
    }

    /// Predictions for every row of the batch.
    pub fn predict(&self, batch: &ContextBatch, mode: &HeadMode<'_>) -> Array1<f64> {
        let (hf, hb) = self.encode(batch, mode);
        self.head_input(&hf, &hb, mode).dot(&self.weights.head_weight) + self.weights.head_bias[0]
    }

    /// Mean absolute error of the batch and its gradient with respect to
    /// every trainable tensor (full backpropagation through time). The
    /// derivative of `|r|` at `r = 0` is taken as 0.
    pub fn loss_and_gradients(
        &self,
        batch: &ContextBatch,
        targets: ArrayView1<f64>,
        mode: &HeadMode<'_>,
    ) -> (f64, Weights) {
        let (residual, grads) = self.residuals_and_gradients(batch, targets, mode);
        let loss = residual.iter().map(|r| r.abs()).sum::<f64>() / residual.len() as f64;
        (loss, grads)
    }

    /// Per-sample residuals `prediction − target` and the gradient of their
    /// mean absolute value.
    pub(crate) fn residuals_and_gradients(
        &self,
        batch: &ContextBatch,
        targets: ArrayView1<f64>,
        mode: &HeadMode<'_>,
    ) -> (Array1<f64>, Weights) {
        let n = batch.len();
        assert_eq!(targets.len(), n, "one target per sample");
        let (ft, bt) = self.encode_traced(batch, mode);
        let z = self.head_input(&ft.top, &bt.top, mode);
        let pred = z.dot(&self.weights.head_weight) + self.weights.head_bias[0];
        let residual = &pred - &targets;
        let d_pred = residual.mapv(|r| {
            if r > 0.0 {
                1.0 / n as f64
            } else if r < 0.0 {
                -1.0 / n as f64
            } else {
                0.0
            }
        });

        let mut grads = self.weights.zeros_like();
        grads.head_weight = z.t().dot(&d_pred);
        grads.head_bias[0] = d_pred.sum();

        let mut dz = d_pred
            .insert_axis(Axis(1))
            .dot(&self.weights.head_weight.view().insert_axis(Axis(0)));
        if let HeadMode::Train { keep, rate } = mode {
            dz = dz * *keep / (1.0 - rate);
        }
        let hidden = self.shape.hidden;
        let d_fwd = dz.slice(s![.., ..hidden]).to_owned();
        let d_bwd = dz.slice(s![.., hidden..]).to_owned();
        let Weights { forward, backward, .. } = &mut grads;
        rayon::join(
            || backprop_stack(&self.weights.forward, &ft, d_fwd, forward),
            || backprop_stack(&self.weights.backward, &bt, d_bwd, backward),
        );
        (residual, grads)
    }

    /// [`ModelParams::loss_and_gradients`], rejecting non-finite results.
    pub fn backward(
        &self,
        batch: &ContextBatch,
        targets: ArrayView1<f64>,
        mode: &HeadMode<'_>,
    ) -> Result<(f64, Weights)> {
        let (loss, grads) = self.loss_and_gradients(batch, targets, mode);
        if !loss.is_finite() {
            return Err(Error::Numeric {
                param: "loss".into(),
                message: format!("batch loss is {loss}"),
            });
        }
        grads.check_finite("gradient")?;
        Ok((loss, grads))
    }
}

/// Encodes a single left/right context. `left` is in time order
/// (`x_{t−w} .. x_{t−1}`), `right` likewise (`x_{t+1} .. x_{t+w}`); the
/// backward stack reads `right` from its far end.
pub fn encode_context(
    model: &ModelParams,
    left: &[f64],
    right: &[f64],
    times: Option<(&[f64], &[f64])>,
) -> (Array1<f64>, Array1<f64>) {
    let row = |v: Vec<f64>| Array2::from_shape_vec((1, v.len()), v).expect("row vector");
    let rev = |v: &[f64]| v.iter().rev().copied().collect::<Vec<_>>();
    let batch = ContextBatch {
        forward: row(left.to_vec()),
        backward: row(rev(right)),
        forward_times: times.map(|(l, _)| row(l.to_vec())),
        backward_times: times.map(|(_, r)| row(rev(r))),
    };
    let (hf, hb) = model.encode(&batch, &HeadMode::Eval);
    (hf.row(0).to_owned(), hb.row(0).to_owned())
}

/// Output layer on one pair of encoder states. `keep` is ignored in eval
/// mode (`None`).
pub fn output_head(
    model: &ModelParams,
    h_forward: ArrayView1<f64>,
    h_backward: ArrayView1<f64>,
    train: Option<(&Array1<f64>, f64)>,
) -> f64 {
    let hf = h_forward.insert_axis(Axis(0)).to_owned();
    let hb = h_backward.insert_axis(Axis(0)).to_owned();
    let keep;
    let mode = match train {
        None => HeadMode::Eval,
        Some((mask, rate)) => {
            keep = mask.view().insert_axis(Axis(0)).to_owned();
            HeadMode::Train { keep: &keep, rate }
        }
    };
    let z = model.head_input(&hf, &hb, &mode);
    z.row(0).dot(&model.weights.head_weight) + model.weights.head_bias[0]
}
