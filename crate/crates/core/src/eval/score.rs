use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::metrics::{mae, mre};
use crate::blocks::BlockClassification;
use crate::dataset::SensorDataset;
use crate::error::{Error, Result};
use crate::imputer::ImputationRun;

/// Errors over one set of scored entries. Metrics are absent when the set is
/// empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScore {
    pub entries: usize,
    pub mae: Option<f64>,
    pub mre: Option<f64>,
    /// Set when the true values sum to zero or below, where the relative
    /// error is undefined or unstable.
    pub mre_warning: bool,
}

impl ScenarioScore {
    pub fn from_pairs(truth: &[f64], est: &[f64]) -> Self {
        if truth.is_empty() {
            return Self {
                entries: 0,
                mae: None,
                mre: None,
                mre_warning: false,
            };
        }
        let sum: f64 = truth.iter().sum();
        Self {
            entries: truth.len(),
            mae: mae(truth, est).ok(),
            mre: mre(truth, est).ok(),
            mre_warning: sum <= 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPair {
    pub general: ScenarioScore,
    pub overall: ScenarioScore,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorScore {
    pub sensor: String,
    #[serde(flatten)]
    pub scores: ScenarioPair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationScore {
    pub iteration: usize,
    #[serde(flatten)]
    pub scores: ScenarioPair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub initializer: String,
    /// Simulated missing rate, for sweep points.
    pub rate: Option<f64>,
    pub config: serde_json::Value,
    pub general: ScenarioScore,
    pub overall: ScenarioScore,
    /// Held-out entries inside spatial or temporal blocks.
    pub block_entries: usize,
    pub per_sensor: Vec<SensorScore>,
    /// Mean over sensors of the per-sensor overall MAE.
    pub sensor_mean_mae: Option<f64>,
    /// Scores of `T_0 ..= T_final`.
    pub trajectory: Vec<IterationScore>,
    pub validation_mae: Vec<f64>,
}

/// Held-out positions split into general (outside blocks) and the rest.
pub(crate) struct Scored {
    positions: Vec<(usize, usize)>,
    truth: Vec<f64>,
    in_block: Vec<bool>,
}

pub(crate) fn scored_entries(dataset: &SensorDataset, blocks: &BlockClassification) -> Scored {
    let mut positions = Vec::new();
    let mut truth = Vec::new();
    let mut in_block = Vec::new();
    for ((t, s), v) in dataset.ground_truth().iter_values() {
        positions.push((t, s));
        truth.push(v);
        in_block.push(blocks.in_block(t, s));
    }
    Scored {
        positions,
        truth,
        in_block,
    }
}

fn score_subset(scored: &Scored, series: &Array2<f64>, keep: impl Fn(usize) -> bool) -> ScenarioScore {
    let mut truth = Vec::new();
    let mut est = Vec::new();
    for i in 0..scored.positions.len() {
        if keep(i) {
            truth.push(scored.truth[i]);
            est.push(series[scored.positions[i]]);
        }
    }
    ScenarioScore::from_pairs(&truth, &est)
}

fn score_pair(scored: &Scored, series: &Array2<f64>, sensor: Option<usize>) -> ScenarioPair {
    let on_sensor = |i: usize| sensor.is_none_or(|s| scored.positions[i].1 == s);
    ScenarioPair {
        general: score_subset(scored, series, |i| on_sensor(i) && !scored.in_block[i]),
        overall: score_subset(scored, series, on_sensor),
    }
}

/// General and overall scores of one dense series against the ground truth.
pub fn score_series(
    series: &Array2<f64>,
    dataset: &SensorDataset,
    blocks: &BlockClassification,
) -> Result<ScenarioPair> {
    let scored = scored_entries(dataset, blocks);
    if scored.positions.is_empty() {
        return Err(Error::Eval("dataset has no held-out entries to score".into()));
    }
    Ok(score_pair(&scored, series, None))
}

/// Scores the final series of `run` in both scenarios, per sensor, and every
/// intermediate series.
pub fn score(run: &ImputationRun, dataset: &SensorDataset, blocks: &BlockClassification) -> Result<EvalReport> {
    let scored = scored_entries(dataset, blocks);
    if scored.positions.is_empty() {
        return Err(Error::Eval("dataset has no held-out entries to score".into()));
    }
    let last = run.final_series();
    let final_pair = score_pair(&scored, last, None);
    let per_sensor: Vec<SensorScore> = dataset
        .sensor_ids()
        .iter()
        .enumerate()
        .map(|(s, id)| SensorScore {
            sensor: id.clone(),
            scores: score_pair(&scored, last, Some(s)),
        })
        .collect();
    let sensor_maes: Vec<f64> = per_sensor.iter().filter_map(|s| s.scores.overall.mae).collect();
    let sensor_mean_mae = (!sensor_maes.is_empty()).then(|| sensor_maes.iter().sum::<f64>() / sensor_maes.len() as f64);
    let trajectory = run
        .series
        .iter()
        .enumerate()
        .map(|(iteration, t)| IterationScore {
            iteration,
            scores: score_pair(&scored, t, None),
        })
        .collect();
    Ok(EvalReport {
        initializer: run.initializer.clone(),
        rate: None,
        config: serde_json::to_value(&run.config)?,
        block_entries: scored.in_block.iter().filter(|b| **b).count(),
        general: final_pair.general,
        overall: final_pair.overall,
        per_sensor,
        sensor_mean_mae,
        trajectory,
        validation_mae: run.validation_mae(),
    })
}
