//! Iterative imputation of missing multi-sensor readings.
//!
//! Gaps are first filled with a statistical estimate ([`init`]); a
//! bidirectional two-layer LSTM ([`nn`]) is then trained on valid anchors and
//! used to re-impute every gap, repeating for a fixed number of rounds
//! ([`imputer`]). [`eval`] scores imputations against held-out ground truth.

pub mod anchor;
pub mod blocks;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod imputer;
pub mod ingest;
pub mod init;
pub mod nn;
pub mod numfmt;
pub mod synth;

pub use anchor::{extract_anchor, is_valid_anchor, Anchor};
pub use blocks::{classify_blocks, scenario_membership, BlockClassification, Scenario};
pub use dataset::{EntryState, GroundTruth, SensorDataset, TimeFormat};
pub use error::{Error, ErrorCategory, Result};
