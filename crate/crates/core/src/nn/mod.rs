//! Numeric kernel: LSTM and phased cells, the bidirectional encoder with its
//! output head, backpropagation through time, initialization and Nadam.
//!
//! All arithmetic is `f64`. Reductions run in a fixed order, so identical
//! inputs and seeds give bit-identical results.

mod cell;
mod checkpoint;
mod model;
mod nadam;
mod params_init;
mod phased;

pub use cell::{lstm_step, sigmoid, LstmCellParams, GATES, PEEP_F, PEEP_I, PEEP_O};
pub use checkpoint::{Checkpoint, Tensor, FORMAT_VERSION};
pub use model::{
    encode_context, output_head, CellKind, ContextBatch, HeadMode, ModelParams, ModelShape,
    TimeGates, Weights,
};
pub use nadam::{nadam_update, NadamConfig, NadamState};
pub use params_init::{glorot_limit, glorot_uniform, init_params, orthogonal};
pub use phased::{
    phased_step, phased_step_with_gate, time_gate, TimeGateParams, DEFAULT_ALPHA_TRAIN,
    DEFAULT_R_ON,
};
