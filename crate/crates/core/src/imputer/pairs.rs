//! Anchor contexts and labels drawn from a dense series.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::config::{Normalization, TrainConfig};
use crate::anchor::{window_timestamps, ObservedCounts};
use crate::dataset::SensorDataset;
use crate::error::{Error, Result};
use crate::nn::{CellKind, ContextBatch};

/// Affine per-sensor scaling `(v − mean) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    pub fn identity(sensors: usize) -> Self {
        Self {
            mean: vec![0.0; sensors],
            scale: vec![1.0; sensors],
        }
    }

    /// Statistics over the Observed entries of rows where `label_row` holds.
    /// A zero spread is replaced by 1 so constant series map to 0.
    pub fn fit(dataset: &SensorDataset, kind: Normalization, label_row: &[bool]) -> Self {
        let sensors = dataset.num_sensors();
        let observed = |s: usize| {
            (0..dataset.num_timestamps())
                .filter(|&t| label_row[t])
                .filter_map(move |t| dataset.observed_value(t, s))
        };
        match kind {
            Normalization::None => Self::identity(sensors),
            Normalization::GlobalZscore => {
                let all: Vec<f64> = (0..sensors).flat_map(observed).collect();
                let (m, sd) = mean_std(&all);
                Self {
                    mean: vec![m; sensors],
                    scale: vec![sd; sensors],
                }
            }
            Normalization::PerSensorZscore => {
                let (mean, scale) = (0..sensors)
                    .map(|s| mean_std(&observed(s).collect::<Vec<_>>()))
                    .unzip();
                Self { mean, scale }
            }
        }
    }

    pub fn normalize(&self, sensor: usize, v: f64) -> f64 {
        (v - self.mean[sensor]) / self.scale[sensor]
    }

    pub fn denormalize(&self, sensor: usize, v: f64) -> f64 {
        v * self.scale[sensor] + self.mean[sensor]
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 1.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 0.0 && sd.is_finite() { sd } else { 1.0 })
}

/// Normalized contexts with their positions and (for training) labels.
#[derive(Clone, Debug)]
pub struct PairSet {
    pub batch: ContextBatch,
    /// Normalized center values; meaningless for prediction batches.
    pub targets: Array1<f64>,
    /// `(t, sensor)` of every row.
    pub positions: Vec<(usize, usize)>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> PairSet {
        PairSet {
            batch: self.batch.select(idx),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            positions: idx.iter().map(|&i| self.positions[i]).collect(),
        }
    }
}

/// Rows whose Observed entries may serve as labels: every row unless it
/// falls into one of `config.test_months`.
pub fn label_rows(dataset: &SensorDataset, config: &TrainConfig) -> Vec<bool> {
    (0..dataset.num_timestamps())
        .map(|t| match dataset.year_month(t) {
            Some((_, m)) => !config.test_months.contains(&m),
            None => true,
        })
        .collect()
}

/// Observed centers of valid anchors on label rows, row-major.
pub fn label_centers(dataset: &SensorDataset, config: &TrainConfig) -> Vec<(usize, usize)> {
    let counts = ObservedCounts::new(dataset);
    let rows = label_rows(dataset, config);
    let mut out = Vec::new();
    for (t, &usable) in rows.iter().enumerate() {
        if !usable {
            continue;
        }
        for s in 0..dataset.num_sensors() {
            if dataset.is_observed(t, s) && counts.is_valid(s, t, config.w) {
                out.push((t, s));
            }
        }
    }
    out
}

/// Contexts for `positions` read from the dense `series`. Slots beyond either
/// end of the series repeat the nearest edge value.
pub fn contexts(
    series: &Array2<f64>,
    dataset: &SensorDataset,
    positions: &[(usize, usize)],
    config: &TrainConfig,
    norm: &Normalizer,
) -> PairSet {
    let n = series.nrows() as isize;
    let w = config.w;
    let len = config.context_len();
    let phased = config.cell_kind == CellKind::Phased;
    let step = dataset.median_step();
    let rows = positions.len();

    let mut forward = Array2::zeros((rows, len));
    let mut backward = Array2::zeros((rows, len));
    let mut forward_times = phased.then(|| Array2::zeros((rows, len)));
    let mut backward_times = phased.then(|| Array2::zeros((rows, len)));
    let mut targets = Array1::zeros(rows);
    for (r, &(t, s)) in positions.iter().enumerate() {
        let at = |pos: isize| norm.normalize(s, series[(pos.clamp(0, n - 1) as usize, s)]);
        let ti = t as isize;
        let wi = w as isize;
        for j in 0..len {
            // forward: t−w, …, t−1 (, t); backward: t+w, …, t+1 (, t)
            forward[(r, j)] = at(ti - wi + j as isize);
            backward[(r, j)] = at(ti + wi - j as isize);
        }
        targets[r] = at(ti);
        if phased {
            let times = window_timestamps(dataset.timestamps(), step, t, w);
            let (ft, bt) = (forward_times.as_mut().unwrap(), backward_times.as_mut().unwrap());
            for j in 0..len {
                ft[(r, j)] = times[j];
                bt[(r, j)] = times[2 * w - j];
            }
        }
    }
    PairSet {
        batch: ContextBatch {
            forward,
            backward,
            forward_times,
            backward_times,
        },
        targets,
        positions: positions.to_vec(),
    }
}

/// One pair per Observed center of a valid anchor on a label row. Context
/// slots read the current estimates in `series`; labels are Observed values.
pub fn build_training_pairs(
    series: &Array2<f64>,
    dataset: &SensorDataset,
    config: &TrainConfig,
    norm: &Normalizer,
) -> Result<PairSet> {
    let centers = label_centers(dataset, config);
    if centers.is_empty() {
        return Err(no_pairs(config));
    }
    Ok(contexts(series, dataset, &centers, config, norm))
}

pub(crate) fn no_pairs(config: &TrainConfig) -> Error {
    Error::Training(format!(
        "no valid anchors with an observed center at w = {}; use a larger window or a lower missing rate",
        config.w
    ))
}
