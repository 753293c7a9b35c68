use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::score::{score, score_series, EvalReport};
use crate::blocks::classify_blocks;
use crate::dataset::SensorDataset;
use crate::error::{Error, Result};
use crate::imputer::{derive_seed, run_cascade_from, TrainConfig};
use crate::ingest::{simulate_missing, MissingSpec};
use crate::init::{initialize, InitializerKind};

pub const DEFAULT_RATES: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];

/// Seeds of the `(holdout draw, training)` streams of one sweep point.
pub fn sweep_seeds(master: u64, rate: f64) -> (u64, u64) {
    let bits = rate.to_bits();
    (derive_seed(master, &[bits, 0]), derive_seed(master, &[bits, 1]))
}

/// Holds out `rate` of the Observed entries, runs the cascade and scores it,
/// once per rate. Reports come back ordered by ascending rate.
pub fn sweep_missing_rates(
    dataset: &SensorDataset,
    rates: &[f64],
    config: &TrainConfig,
    kind: &InitializerKind,
    block_len: usize,
) -> Result<Vec<EvalReport>> {
    if rates.is_empty() {
        return Err(Error::Config("no missing rates given".into()));
    }
    if let Some(r) = rates.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(Error::Config(format!("missing rate {r} is outside (0, 1)")));
    }
    let mut sorted = rates.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let run_point = |&rate: &f64| -> Result<EvalReport> {
        let (holdout_seed, train_seed) = sweep_seeds(config.seed, rate);
        let held = simulate_missing(dataset, &MissingSpec::random_rate(rate, holdout_seed))?;
        let point = TrainConfig {
            seed: train_seed,
            ..config.clone()
        };
        let t0 = initialize(&held, kind)?;
        let run = run_cascade_from(&held, &point, t0, kind.label())?;
        let mut report = score(&run, &held, &classify_blocks(&held, block_len))?;
        report.rate = Some(rate);
        Ok(report)
    };
    if config.deterministic {
        sorted.iter().map(run_point).collect()
    } else {
        sorted.par_iter().map(run_point).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitializerComparison {
    pub initializer: String,
    pub init_mae: Option<f64>,
    pub final_mae: Option<f64>,
    pub init_general_mae: Option<f64>,
    pub final_general_mae: Option<f64>,
    pub report: EvalReport,
}

/// Scores each starting series directly and after a full cascade.
pub fn compare_initial_series(
    dataset: &SensorDataset,
    starts: Vec<(String, Array2<f64>)>,
    config: &TrainConfig,
    block_len: usize,
) -> Result<Vec<InitializerComparison>> {
    if starts.is_empty() {
        return Err(Error::Config("no initializers to compare".into()));
    }
    let blocks = classify_blocks(dataset, block_len);
    starts
        .into_iter()
        .map(|(label, t0)| {
            let init = score_series(&t0, dataset, &blocks)?;
            let run = run_cascade_from(dataset, config, t0, label.clone())?;
            let report = score(&run, dataset, &blocks)?;
            Ok(InitializerComparison {
                initializer: label,
                init_mae: init.overall.mae,
                final_mae: report.overall.mae,
                init_general_mae: init.general.mae,
                final_general_mae: report.general.mae,
                report,
            })
        })
        .collect()
}

pub fn compare_initializers(
    dataset: &SensorDataset,
    kinds: &[InitializerKind],
    config: &TrainConfig,
    block_len: usize,
) -> Result<Vec<InitializerComparison>> {
    let starts = kinds
        .iter()
        .map(|k| Ok((k.label(), initialize(dataset, k)?)))
        .collect::<Result<Vec<_>>>()?;
    compare_initial_series(dataset, starts, config, block_len)
}
