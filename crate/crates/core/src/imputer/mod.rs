//! Supervised training on valid anchors and the iterative re-imputation
//! cascade.
//!
//! Each round trains the network on anchors read from the current dense
//! series `T_i`, then re-estimates every missing position from `T_i` at once
//! to produce `T_{i+1}`. Observed entries are never rewritten.

mod cascade;
mod config;
mod pairs;
mod train;

pub use cascade::{missing_index, predict_missing, run_cascade, run_cascade_from, ImputationRun, RoundReport};
pub use config::{Mode, Normalization, TrainConfig};
pub use pairs::{build_training_pairs, contexts, label_centers, label_rows, Normalizer, PairSet};
pub use train::{fit, pair_mae, predict_pairs, train_epoch, FitReport};

/// Mixes `tags` into `master` (SplitMix64 finalizer per step), giving
/// independent streams for each purpose.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    tags.iter().fold(mix(master), |acc, &t| mix(acc ^ mix(t)))
}
