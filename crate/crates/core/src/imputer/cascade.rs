//! The train-then-reimpute loop.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Mode, TrainConfig};
use super::pairs::{contexts, label_centers, label_rows, no_pairs, Normalizer};
use super::train::{fit, predict_pairs, FitReport};
use super::derive_seed;
use crate::dataset::{EntryState, SensorDataset};
use crate::error::{Error, Result};
use crate::ingest::choose_validation;
use crate::init::{initialize, InitializerKind};
use crate::nn::{init_params, CellKind, ModelParams, ModelShape, NadamState};

const PREDICT_CHUNK: usize = 4096;

/// Every non-Observed position, row-major.
pub fn missing_index(dataset: &SensorDataset) -> Vec<(usize, usize)> {
    dataset
        .mask()
        .indexed_iter()
        .filter(|(_, m)| **m != EntryState::Observed)
        .map(|((t, s), _)| (t, s))
        .collect()
}

/// Re-estimates every position in `positions` from contexts read out of
/// `series`, all at once, and returns the updated copy. Other entries are
/// copied through untouched.
pub fn predict_missing(
    model: &ModelParams,
    series: &Array2<f64>,
    dataset: &SensorDataset,
    positions: &[(usize, usize)],
    config: &TrainConfig,
    norm: &Normalizer,
) -> Array2<f64> {
    let mut next = series.clone();
    for chunk in positions.chunks(PREDICT_CHUNK) {
        let pairs = contexts(series, dataset, chunk, config, norm);
        for (&(t, s), v) in chunk.iter().zip(predict_pairs(model, &pairs, norm)) {
            next[(t, s)] = v;
        }
    }
    next
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    /// Best validation MAE of the round, averaged over models.
    pub validation_mae: f64,
    /// One report per trained model (one in mixed mode, one per sensor in
    /// separate mode).
    pub fits: Vec<FitReport>,
}

/// Everything a cascade produces.
#[derive(Clone, Debug)]
pub struct ImputationRun {
    pub config: TrainConfig,
    pub initializer: String,
    /// `T_0 ..= T_iter_num`.
    pub series: Vec<Array2<f64>>,
    pub rounds: Vec<RoundReport>,
    pub missing_index: Vec<(usize, usize)>,
    /// Final best model(s): one in mixed mode, one per sensor otherwise.
    pub models: Vec<ModelParams>,
    pub normalizers: Vec<Normalizer>,
}

impl ImputationRun {
    pub fn final_series(&self) -> &Array2<f64> {
        self.series.last().expect("a run holds at least T_0")
    }

    pub fn validation_mae(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.validation_mae).collect()
    }
}

/// Initializes with `kind`, then runs the cascade.
pub fn run_cascade(dataset: &SensorDataset, config: &TrainConfig, kind: &InitializerKind) -> Result<ImputationRun> {
    let t0 = initialize(dataset, kind)?;
    run_cascade_from(dataset, config, t0, kind.label())
}

/// Runs the cascade from a caller-supplied dense `T_0`.
pub fn run_cascade_from(
    dataset: &SensorDataset,
    config: &TrainConfig,
    t0: Array2<f64>,
    initializer: String,
) -> Result<ImputationRun> {
    config.validate()?;
    if t0.dim() != dataset.values().dim() {
        return Err(Error::Data(format!(
            "initial series is {:?}, dataset is {:?}",
            t0.dim(),
            dataset.values().dim()
        )));
    }
    if let Some(((t, s), _)) = t0.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Data(format!("initial series is not finite at ({t}, {s})")));
    }
    let missing = missing_index(dataset);
    let out = match config.mode {
        Mode::Mixed => {
            let single = cascade(dataset, config, t0, config.seed)?;
            ImputationRun {
                config: config.clone(),
                initializer,
                series: single.series,
                rounds: single
                    .fits
                    .into_iter()
                    .enumerate()
                    .map(|(round, f)| RoundReport {
                        round: round + 1,
                        validation_mae: f.best_validation_mae,
                        fits: vec![f],
                    })
                    .collect(),
                missing_index: missing,
                models: vec![single.model],
                normalizers: vec![single.norm],
            }
        }
        Mode::Separate => separate(dataset, config, t0, initializer, missing)?,
    };
    Ok(out)
}

fn separate(
    dataset: &SensorDataset,
    config: &TrainConfig,
    t0: Array2<f64>,
    initializer: String,
    missing: Vec<(usize, usize)>,
) -> Result<ImputationRun> {
    let sensors = dataset.num_sensors();
    let mut series = vec![t0.clone(); config.iter_num + 1];
    let mut per_round: Vec<Vec<FitReport>> = vec![Vec::new(); config.iter_num];
    let mut models = Vec::with_capacity(sensors);
    let mut normalizers = Vec::with_capacity(sensors);
    for s in 0..sensors {
        let sub = dataset.select_sensors(&[s]);
        let column = t0.column(s).to_owned().insert_axis(Axis(1));
        let single = cascade(&sub, config, column, derive_seed(config.seed, &[0x5e9a, s as u64]))?;
        for (round, t) in single.series.iter().enumerate() {
            series[round].column_mut(s).assign(&t.column(0));
        }
        for (round, f) in single.fits.into_iter().enumerate() {
            per_round[round].push(f);
        }
        models.push(single.model);
        normalizers.push(single.norm);
    }
    let rounds = per_round
        .into_iter()
        .enumerate()
        .map(|(round, fits)| RoundReport {
            round: round + 1,
            validation_mae: fits.iter().map(|f| f.best_validation_mae).sum::<f64>() / fits.len() as f64,
            fits,
        })
        .collect();
    Ok(ImputationRun {
        config: config.clone(),
        initializer,
        series,
        rounds,
        missing_index: missing,
        models,
        normalizers,
    })
}

struct SingleCascade {
    series: Vec<Array2<f64>>,
    fits: Vec<FitReport>,
    model: ModelParams,
    norm: Normalizer,
}

/// Time extent of one anchor, which bounds phased gate periods.
fn anchor_span(dataset: &SensorDataset, w: usize) -> f64 {
    (2 * w) as f64 * dataset.median_step()
}

fn fresh_model(dataset: &SensorDataset, config: &TrainConfig, seed: u64) -> ModelParams {
    let shape = ModelShape {
        cell: config.cell_kind,
        ..ModelShape::standard(config.hidden)
    };
    init_params(shape, anchor_span(dataset, config.w), seed)
}

fn cascade(dataset: &SensorDataset, config: &TrainConfig, t0: Array2<f64>, seed: u64) -> Result<SingleCascade> {
    let norm = Normalizer::fit(dataset, config.normalization, &label_rows(dataset, config));
    let centers = label_centers(dataset, config);
    let mut split_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
    let validation = choose_validation(&centers, config.validation_fraction, &mut split_rng);
    let train: Vec<(usize, usize)> = centers.iter().copied().filter(|c| !validation.contains(c)).collect();
    if train.is_empty() {
        return Err(no_pairs(config));
    }
    let validation: Vec<(usize, usize)> = validation.into_iter().collect();
    let missing = missing_index(dataset);
    if config.cell_kind == CellKind::Phased {
        log::info!("phased cells, anchor span {}", anchor_span(dataset, config.w));
    }

    let mut model = fresh_model(dataset, config, derive_seed(seed, &[2]));
    let mut optimizer = NadamState::new(config.optimizer, &model.weights);
    let mut series = vec![t0];
    let mut fits = Vec::with_capacity(config.iter_num);
    for round in 0..config.iter_num {
        if round > 0 && !config.warm_start {
            model = fresh_model(dataset, config, derive_seed(seed, &[2, round as u64]));
            optimizer = NadamState::new(config.optimizer, &model.weights);
        }
        let current = series.last().expect("T_0 present");
        let train_pairs = contexts(current, dataset, &train, config, &norm);
        let val_pairs = contexts(current, dataset, &validation, config, &norm);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[3, round as u64]));
        let report = fit(
            &mut model,
            &mut optimizer,
            &train_pairs,
            &val_pairs,
            config,
            &norm,
            &mut rng,
            round > 0 && config.warm_start,
        )?;
        log::info!(
            "round {}: {} epochs, best validation MAE {}",
            round + 1,
            report.epochs,
            report.best_validation_mae
        );
        let next = predict_missing(&model, current, dataset, &missing, config, &norm);
        series.push(next);
        fits.push(report);
    }
    Ok(SingleCascade {
        series,
        fits,
        model,
        norm,
    })
}
