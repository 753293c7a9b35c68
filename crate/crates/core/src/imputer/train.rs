//! Minibatch training with early stopping on validation error.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::pairs::{Normalizer, PairSet};
use crate::error::{Error, Result};
use crate::nn::{nadam_update, HeadMode, ModelParams, NadamState};

const EVAL_CHUNK: usize = 512;

/// One pass over `pairs` in a seeded random order, one optimizer step per
/// minibatch. Returns the epoch's mean absolute training error in the
/// original units.
pub fn train_epoch(
    model: &mut ModelParams,
    pairs: &PairSet,
    optimizer: &mut NadamState,
    rng: &mut ChaCha8Rng,
    config: &TrainConfig,
    norm: &Normalizer,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(rng);
    let width = model.shape.concat_dim();
    let mut total = 0.0;
    for idx in order.chunks(config.batch_size) {
        let batch = pairs.select(idx);
        let keep = Array2::from_shape_simple_fn((idx.len(), width), || {
            if config.dropout > 0.0 && rng.random::<f64>() < config.dropout {
                0.0
            } else {
                1.0
            }
        });
        let mode = HeadMode::Train {
            keep: &keep,
            rate: config.dropout,
        };
        let (residual, grads) = model.residuals_and_gradients(&batch.batch, batch.targets.view(), &mode);
        if let Some(r) = residual.iter().find(|r| !r.is_finite()) {
            return Err(Error::Numeric {
                param: "loss".into(),
                message: format!("non-finite residual {r} in a batch of {}", idx.len()),
            });
        }
        grads.check_finite("gradient")?;
        nadam_update(optimizer, &mut model.weights, &grads);
        total += residual
            .iter()
            .zip(&batch.positions)
            .map(|(r, &(_, s))| r.abs() * norm.scale[s])
            .sum::<f64>();
    }
    Ok(total / pairs.len() as f64)
}

/// Eval-mode predictions for every row, de-normalized.
pub fn predict_pairs(model: &ModelParams, pairs: &PairSet, norm: &Normalizer) -> Vec<f64> {
    let rows: Vec<usize> = (0..pairs.len()).collect();
    let chunks: Vec<Vec<f64>> = rows
        .par_chunks(EVAL_CHUNK)
        .map(|idx| {
            let part = pairs.select(idx);
            let pred = model.predict(&part.batch, &HeadMode::Eval);
            pred.iter()
                .zip(&part.positions)
                .map(|(p, &(_, s))| norm.denormalize(s, *p))
                .collect()
        })
        .collect();
    chunks.concat()
}

/// Mean absolute error of eval-mode predictions against the pair labels, in
/// the original units. `NaN` for an empty set.
pub fn pair_mae(model: &ModelParams, pairs: &PairSet, norm: &Normalizer) -> f64 {
    let pred = predict_pairs(model, pairs, norm);
    let sum: f64 = pred
        .iter()
        .zip(&pairs.positions)
        .zip(&pairs.targets)
        .map(|((p, &(_, s)), y)| (p - norm.denormalize(s, *y)).abs())
        .sum();
    sum / pairs.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub epochs: usize,
    /// Epoch (1-based) whose weights were kept; 0 means the incoming weights.
    pub best_epoch: usize,
    pub best_validation_mae: f64,
    pub train_mae: Vec<f64>,
    pub validation_mae: Vec<f64>,
}

/// Trains until `max_epochs` or until `max(patience, 1)` consecutive epochs
/// fail to improve the validation error, then restores the best weights.
///
/// With `score_initial` the incoming weights compete as epoch 0. Without a
/// validation set, the epoch training error drives selection instead.
#[allow(clippy::too_many_arguments)]
pub fn fit(
    model: &mut ModelParams,
    optimizer: &mut NadamState,
    train: &PairSet,
    validation: &PairSet,
    config: &TrainConfig,
    norm: &Normalizer,
    rng: &mut ChaCha8Rng,
    score_initial: bool,
) -> Result<FitReport> {
    let has_validation = !validation.is_empty();
    let mut best = f64::INFINITY;
    if score_initial && has_validation {
        best = pair_mae(model, validation, norm);
    }
    let mut best_state = (model.clone(), optimizer.clone());
    let mut report = FitReport {
        epochs: 0,
        best_epoch: 0,
        best_validation_mae: best,
        train_mae: Vec::new(),
        validation_mae: Vec::new(),
    };
    let limit = config.patience.max(1);
    let mut wait = 0;
    for epoch in 1..=config.max_epochs {
        let train_mae = train_epoch(model, train, optimizer, rng, config, norm)?;
        let score = if has_validation {
            pair_mae(model, validation, norm)
        } else {
            train_mae
        };
        report.epochs = epoch;
        report.train_mae.push(train_mae);
        report.validation_mae.push(score);
        log::debug!("epoch {epoch}: train {train_mae:.6} validation {score:.6}");
        if score < best {
            best = score;
            best_state = (model.clone(), optimizer.clone());
            report.best_epoch = epoch;
            wait = 0;
        } else {
            wait += 1;
            if wait >= limit {
                break;
            }
        }
    }
    (*model, *optimizer) = best_state;
    report.best_validation_mae = best;
    Ok(report)
}
