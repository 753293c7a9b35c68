//! Seeded parameter initialization.
//!
//! Input kernels are Glorot-uniform per gate block, recurrent kernels are
//! orthogonal per gate block, biases and peepholes start at zero.

use nalgebra::DMatrix;
use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::cell::{LstmCellParams, GATES};
use super::model::{CellKind, ModelParams, ModelShape, TimeGates};
use super::phased::TimeGateParams;

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub fn glorot_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let limit = glorot_limit(rows, cols);
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..limit))
}

/// Orthogonal `n × n` matrix: Q of the QR factorisation of a standard-normal
/// matrix, with columns sign-corrected so that `diag(R) > 0`.
pub fn orthogonal<R: Rng>(n: usize, rng: &mut R) -> Array2<f64> {
    let gauss = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = gauss.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Array2::from_shape_fn((n, n), |(i, j)| q[(i, j)])
}

fn init_cell<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> LstmCellParams {
    let mut cell = LstmCellParams::zeros(input, hidden);
    for g in 0..GATES {
        let cols = g * hidden..(g + 1) * hidden;
        cell.w_x.slice_mut(s![.., cols.clone()]).assign(&glorot_uniform(input, hidden, rng));
        cell.w_h.slice_mut(s![.., cols]).assign(&orthogonal(hidden, rng));
    }
    cell
}

/// Fresh model. `time_span` bounds the periods of phased time gates (the
/// typical time extent of one context window); ignored for standard cells.
pub fn init_params(shape: ModelShape, time_span: f64, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = ModelParams::zeros(shape);
    for stack in [&mut model.weights.forward, &mut model.weights.backward] {
        for cell in stack.iter_mut() {
            *cell = init_cell(cell.input_dim(), shape.hidden, &mut rng);
        }
    }
    let head = glorot_uniform(shape.concat_dim(), 1, &mut rng);
    model.weights.head_weight = head.column(0).to_owned();
    if shape.cell == CellKind::Phased {
        let mut sample = || {
            (0..shape.layers)
                .map(|_| TimeGateParams::sample(shape.hidden, time_span, &mut rng))
                .collect()
        };
        let forward = sample();
        let backward = sample();
        model.time_gates = Some(TimeGates { forward, backward });
    }
    model
}
