//! Ground-truth holdout generation.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::SensorDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// Exactly `floor(rate * #observed)` uniformly chosen observed cells.
    RandomRate,
    /// `RandomRate` with the rate fixed at 20%.
    RandomFraction20,
    /// Cells missing in the source month are held out in the target month.
    PositionCopy {
        source: (i32, u32),
        target: (i32, u32),
    },
    /// Contiguous runs of observed cells until the rate's count is reached.
    BlockInjection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissingSpec {
    pub mechanism: Mechanism,
    pub rate: f64,
    /// Inclusive `(min, max)` run length for `BlockInjection`.
    pub block_length: (usize, usize),
    pub seed: u64,
}

impl MissingSpec {
    pub fn random_rate(rate: f64, seed: u64) -> Self {
        Self {
            mechanism: Mechanism::RandomRate,
            rate,
            block_length: (1, 1),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rate) {
            return Err(Error::Config(format!(
                "missing rate must lie in [0, 1), got {}",
                self.rate
            )));
        }
        let (lo, hi) = self.block_length;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!(
                "block lengths must satisfy 1 <= min <= max, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

/// Row range `[start, start + len)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Period {
    pub start: usize,
    pub len: usize,
}

fn observed_cells(dataset: &SensorDataset) -> Vec<(usize, usize)> {
    dataset
        .mask()
        .indexed_iter()
        .filter(|(_, s)| s.is_observed())
        .map(|(ix, _)| ix)
        .collect()
}

pub fn simulate_missing(dataset: &SensorDataset, spec: &MissingSpec) -> Result<SensorDataset> {
    spec.validate()?;
    match &spec.mechanism {
        Mechanism::RandomRate => holdout_random(dataset, spec.rate, spec.seed),
        Mechanism::RandomFraction20 => holdout_random(dataset, 0.2, spec.seed),
        Mechanism::PositionCopy { source, target } => holdout_month_copy(dataset, *source, *target),
        Mechanism::BlockInjection => holdout_blocks(dataset, spec),
    }
}

fn holdout_random(dataset: &SensorDataset, rate: f64, seed: u64) -> Result<SensorDataset> {
    let cells = observed_cells(dataset);
    let count = (rate * cells.len() as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = sample(&mut rng, cells.len(), count).into_vec();
    chosen.sort_unstable();
    let mut out = dataset.clone();
    for i in chosen {
        let (t, s) = cells[i];
        out.set_holdout(t, s)?;
    }
    Ok(out)
}

fn holdout_blocks(dataset: &SensorDataset, spec: &MissingSpec) -> Result<SensorDataset> {
    let total = observed_cells(dataset).len();
    let target = (spec.rate * total as f64).floor() as usize;
    let mut out = dataset.clone();
    if target == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rows = dataset.num_timestamps();
    let (lo, hi) = spec.block_length;
    let mut converted = 0;
    while converted < target {
        let sensor = rng.random_range(0..dataset.num_sensors());
        let len = rng.random_range(lo..=hi);
        let start = rng.random_range(0..rows);
        for t in start..(start + len).min(rows) {
            if converted == target {
                break;
            }
            if out.is_observed(t, sensor) {
                out.set_holdout(t, sensor)?;
                converted += 1;
            }
        }
    }
    Ok(out)
}

/// For every sensor and offset missing in `source`, the observed cell at the
/// same offset of `target` becomes Holdout.
pub fn holdout_position_copy(dataset: &SensorDataset, source: Period, target: Period) -> Result<SensorDataset> {
    if source.len != target.len {
        return Err(Error::Config(format!(
            "source period has {} rows but target has {}",
            source.len, target.len
        )));
    }
    let rows = dataset.num_timestamps();
    if source.start + source.len > rows || target.start + target.len > rows {
        return Err(Error::Config("period exceeds the dataset's time range".into()));
    }
    let mut out = dataset.clone();
    for s in 0..dataset.num_sensors() {
        for k in 0..source.len {
            let src = source.start + k;
            let dst = target.start + k;
            if !dataset.is_observed(src, s) && dataset.is_observed(dst, s) {
                out.set_holdout(dst, s)?;
            }
        }
    }
    Ok(out)
}

/// Rows belonging to a calendar month.
pub fn month_rows(dataset: &SensorDataset, month: (i32, u32)) -> Result<Vec<usize>> {
    if !dataset.time_format().has_calendar() {
        return Err(Error::Config("dataset timestamps carry no calendar".into()));
    }
    Ok((0..dataset.num_timestamps())
        .filter(|&t| dataset.year_month(t) == Some(month))
        .collect())
}

/// Month-to-month position copy: a cell missing at a given day-of-month and
/// time of day in `source` is held out at the same day and time in `target`.
/// Days that do not exist in the target month are skipped.
pub fn holdout_month_copy(
    dataset: &SensorDataset,
    source: (i32, u32),
    target: (i32, u32),
) -> Result<SensorDataset> {
    let src_rows = month_rows(dataset, source)?;
    let dst_rows = month_rows(dataset, target)?;
    if src_rows.is_empty() || dst_rows.is_empty() {
        return Err(Error::Config(format!(
            "months {}-{:02} and {}-{:02} must both lie within the dataset",
            source.0, source.1, target.0, target.1
        )));
    }
    let month_start = |(y, m): (i32, u32)| {
        chrono::NaiveDate::from_ymd_opt(y, m, 1)
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .map(crate::dataset::datetime_to_hours)
            .ok_or_else(|| Error::Config(format!("invalid month {y}-{m:02}")))
    };
    let shift = month_start(target)? - month_start(source)?;
    let mut out = dataset.clone();
    let times = dataset.timestamps();
    for &src in &src_rows {
        let want = times[src] + shift;
        let Ok(dst) = times.binary_search_by(|x| x.total_cmp(&want)) else {
            continue;
        };
        if dataset.year_month(dst) != Some(target) {
            continue;
        }
        for s in 0..dataset.num_sensors() {
            if !dataset.is_observed(src, s) && dataset.is_observed(dst, s) {
                out.set_holdout(dst, s)?;
            }
        }
    }
    Ok(out)
}
