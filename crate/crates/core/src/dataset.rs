//! Aligned multi-sensor series with a per-entry observability mask.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, Datelike, NaiveDateTime};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State of one (timestamp, sensor) cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntryState {
    Observed,
    Missing,
    /// Observed in reality but masked out to serve as ground truth.
    Holdout,
}

impl EntryState {
    pub fn is_observed(self) -> bool {
        self == EntryState::Observed
    }
}

/// How timestamps were written in the source file.
///
/// Timestamps are always stored as `f64` hours. `EpochHours` and `Iso8601`
/// both count hours since the Unix epoch, so they carry calendar metadata;
/// `Real` is an abstract clock (irregular sampling) with no calendar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeFormat {
    EpochHours,
    Iso8601,
    Real,
}

impl TimeFormat {
    pub fn has_calendar(self) -> bool {
        !matches!(self, TimeFormat::Real)
    }
}

static TRUTH_READS: AtomicU64 = AtomicU64::new(0);

/// Number of ground-truth values read since process start.
///
/// Every value-returning accessor on [`GroundTruth`] bumps this counter, which
/// lets tests assert that imputation code never touches held-out values.
pub fn truth_reads() -> u64 {
    TRUTH_READS.load(Ordering::SeqCst)
}

/// True values of Holdout entries, keyed by `(t, sensor)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    values: BTreeMap<(usize, usize), f64>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Positions `(t, sensor)` that carry a true value. Does not read values.
    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.values.keys().copied()
    }

    pub fn contains(&self, t: usize, sensor: usize) -> bool {
        self.values.contains_key(&(t, sensor))
    }

    pub fn get(&self, t: usize, sensor: usize) -> Option<f64> {
        TRUTH_READS.fetch_add(1, Ordering::SeqCst);
        self.values.get(&(t, sensor)).copied()
    }

    /// All `((t, sensor), value)` pairs in row-major order.
    pub fn iter_values(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        TRUTH_READS.fetch_add(self.values.len() as u64, Ordering::SeqCst);
        self.values.iter().map(|(k, v)| (*k, *v))
    }

    fn insert(&mut self, t: usize, sensor: usize, value: f64) {
        self.values.insert((t, sensor), value);
    }

    fn take(&mut self, t: usize, sensor: usize) -> Option<f64> {
        self.values.remove(&(t, sensor))
    }
}

/// Multi-sensor time series aligned on a shared, strictly increasing clock.
///
/// `values` and `mask` are `[num_timestamps × num_sensors]`. Cells that are
/// not `Observed` hold `NaN` in `values`; true values of `Holdout` cells live
/// in a separate [`GroundTruth`] store.
#[derive(Clone, Debug)]
pub struct SensorDataset {
    sensor_ids: Vec<String>,
    timestamps: Vec<f64>,
    time_format: TimeFormat,
    values: Array2<f64>,
    mask: Array2<EntryState>,
    truth: GroundTruth,
    variable_name: String,
}

/// Equality treats the `NaN` placeholders of non-observed cells as equal.
impl PartialEq for SensorDataset {
    fn eq(&self, other: &Self) -> bool {
        self.sensor_ids == other.sensor_ids
            && self.timestamps == other.timestamps
            && self.time_format == other.time_format
            && self.mask == other.mask
            && self.truth == other.truth
            && self.variable_name == other.variable_name
            && self.values.shape() == other.values.shape()
            && self
                .values
                .iter()
                .zip(other.values.iter())
                .all(|(a, b)| a == b || (a.is_nan() && b.is_nan()))
    }
}

impl SensorDataset {
    /// Builds a dataset from raw parts. Values of non-observed cells are
    /// discarded. `Holdout` cells are rejected here; use
    /// [`SensorDataset::set_holdout`] so their truth is recorded.
    pub fn new(
        sensor_ids: Vec<String>,
        timestamps: Vec<f64>,
        time_format: TimeFormat,
        mut values: Array2<f64>,
        mask: Array2<EntryState>,
        variable_name: impl Into<String>,
    ) -> Result<Self> {
        let (rows, cols) = values.dim();
        if mask.dim() != (rows, cols) {
            return Err(Error::Data(format!(
                "mask shape {:?} differs from values shape {:?}",
                mask.dim(),
                (rows, cols)
            )));
        }
        if rows != timestamps.len() || cols != sensor_ids.len() {
            return Err(Error::Data(format!(
                "values shape {:?} does not match {} timestamps x {} sensors",
                (rows, cols),
                timestamps.len(),
                sensor_ids.len()
            )));
        }
        if let Some(w) = timestamps.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::Data(format!(
                "timestamps must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        for ((t, s), state) in mask.indexed_iter() {
            match state {
                EntryState::Observed => {
                    if !values[(t, s)].is_finite() {
                        return Err(Error::Data(format!(
                            "observed cell (sensor {}, t {t}) is not finite",
                            sensor_ids[s]
                        )));
                    }
                }
                EntryState::Missing => values[(t, s)] = f64::NAN,
                EntryState::Holdout => {
                    return Err(Error::Data(
                        "holdout cells must be created through set_holdout".into(),
                    ))
                }
            }
        }
        Ok(Self {
            sensor_ids,
            timestamps,
            time_format,
            values,
            mask,
            truth: GroundTruth::default(),
            variable_name: variable_name.into(),
        })
    }

    /// Convenience constructor: `NaN` cells become `Missing`.
    pub fn from_matrix(
        sensor_ids: Vec<String>,
        timestamps: Vec<f64>,
        time_format: TimeFormat,
        values: Array2<f64>,
        variable_name: impl Into<String>,
    ) -> Result<Self> {
        let mask = values.mapv(|v| {
            if v.is_nan() {
                EntryState::Missing
            } else {
                EntryState::Observed
            }
        });
        Self::new(sensor_ids, timestamps, time_format, values, mask, variable_name)
    }

    pub fn num_timestamps(&self) -> usize {
        self.timestamps.len()
    }

    pub fn num_sensors(&self) -> usize {
        self.sensor_ids.len()
    }

    pub fn sensor_ids(&self) -> &[String] {
        &self.sensor_ids
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn time_format(&self) -> TimeFormat {
        self.time_format
    }

    pub fn variable_name(&self) -> &str {
        &self.variable_name
    }

    pub fn set_variable_name(&mut self, name: impl Into<String>) {
        self.variable_name = name.into();
    }

    /// Raw value matrix; non-observed cells are `NaN`.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn mask(&self) -> &Array2<EntryState> {
        &self.mask
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn state(&self, t: usize, sensor: usize) -> EntryState {
        self.mask[(t, sensor)]
    }

    pub fn is_observed(&self, t: usize, sensor: usize) -> bool {
        self.mask[(t, sensor)].is_observed()
    }

    /// Value of an observed cell; `None` for Missing and Holdout alike.
    pub fn observed_value(&self, t: usize, sensor: usize) -> Option<f64> {
        self.is_observed(t, sensor).then(|| self.values[(t, sensor)])
    }

    pub fn count(&self, state: EntryState) -> usize {
        self.mask.iter().filter(|s| **s == state).count()
    }

    pub fn check_index(&self, t: usize, sensor: usize) -> Result<()> {
        if sensor >= self.num_sensors() {
            return Err(Error::Range(format!(
                "sensor {sensor} (dataset has {})",
                self.num_sensors()
            )));
        }
        if t >= self.num_timestamps() {
            return Err(Error::Range(format!(
                "timestamp index {t} (dataset has {})",
                self.num_timestamps()
            )));
        }
        Ok(())
    }

    /// Moves an observed cell into the ground-truth store and masks it.
    pub fn set_holdout(&mut self, t: usize, sensor: usize) -> Result<()> {
        self.check_index(t, sensor)?;
        if !self.is_observed(t, sensor) {
            return Err(Error::Data(format!(
                "cannot hold out non-observed cell (sensor {}, t {t})",
                self.sensor_ids[sensor]
            )));
        }
        let v = self.values[(t, sensor)];
        self.truth.insert(t, sensor, v);
        self.values[(t, sensor)] = f64::NAN;
        self.mask[(t, sensor)] = EntryState::Holdout;
        Ok(())
    }

    /// Marks a missing cell as Holdout with a known true value (sidecar load).
    pub fn attach_truth(&mut self, t: usize, sensor: usize, value: f64) -> Result<()> {
        self.check_index(t, sensor)?;
        if self.is_observed(t, sensor) {
            return Err(Error::Data(format!(
                "ground truth given for observed cell (sensor {}, t {t})",
                self.sensor_ids[sensor]
            )));
        }
        if !value.is_finite() {
            return Err(Error::Data("ground truth must be finite".into()));
        }
        self.truth.insert(t, sensor, value);
        self.mask[(t, sensor)] = EntryState::Holdout;
        Ok(())
    }

    /// Restores a Holdout cell to Observed with its true value.
    pub fn restore_holdout(&mut self, t: usize, sensor: usize) -> Option<f64> {
        let v = self.truth.take(t, sensor)?;
        self.values[(t, sensor)] = v;
        self.mask[(t, sensor)] = EntryState::Observed;
        Some(v)
    }

    /// Sub-dataset restricted to the given sensor columns (in that order).
    pub fn select_sensors(&self, sensors: &[usize]) -> SensorDataset {
        let rows = self.num_timestamps();
        let values = Array2::from_shape_fn((rows, sensors.len()), |(t, j)| {
            self.values[(t, sensors[j])]
        });
        let mask =
            Array2::from_shape_fn((rows, sensors.len()), |(t, j)| self.mask[(t, sensors[j])]);
        let mut truth = GroundTruth::default();
        for (j, &s) in sensors.iter().enumerate() {
            for t in 0..rows {
                if let Some(v) = self.truth.values.get(&(t, s)) {
                    truth.insert(t, j, *v);
                }
            }
        }
        SensorDataset {
            sensor_ids: sensors.iter().map(|&s| self.sensor_ids[s].clone()).collect(),
            timestamps: self.timestamps.clone(),
            time_format: self.time_format,
            values,
            mask,
            truth,
            variable_name: self.variable_name.clone(),
        }
    }

    /// Sub-dataset restricted to the given (increasing) timestamp rows.
    pub fn select_rows(&self, rows: &[usize]) -> SensorDataset {
        let cols = self.num_sensors();
        let values = Array2::from_shape_fn((rows.len(), cols), |(i, s)| self.values[(rows[i], s)]);
        let mask = Array2::from_shape_fn((rows.len(), cols), |(i, s)| self.mask[(rows[i], s)]);
        let mut truth = GroundTruth::default();
        for (i, &t) in rows.iter().enumerate() {
            for s in 0..cols {
                if let Some(v) = self.truth.values.get(&(t, s)) {
                    truth.insert(i, s, *v);
                }
            }
        }
        SensorDataset {
            sensor_ids: self.sensor_ids.clone(),
            timestamps: rows.iter().map(|&t| self.timestamps[t]).collect(),
            time_format: self.time_format,
            values,
            mask,
            truth,
            variable_name: self.variable_name.clone(),
        }
    }

    /// Calendar (year, month) of row `t`, when timestamps carry a calendar.
    pub fn year_month(&self, t: usize) -> Option<(i32, u32)> {
        if !self.time_format.has_calendar() {
            return None;
        }
        let dt = hours_to_datetime(self.timestamps[t])?;
        Some((dt.year(), dt.month()))
    }

    /// Median spacing between consecutive timestamps (1.0 for a single row).
    pub fn median_step(&self) -> f64 {
        let mut steps: Vec<f64> = self.timestamps.windows(2).map(|w| w[1] - w[0]).collect();
        if steps.is_empty() {
            return 1.0;
        }
        steps.sort_by(f64::total_cmp);
        steps[steps.len() / 2]
    }
}

pub(crate) fn hours_to_datetime(hours: f64) -> Option<NaiveDateTime> {
    let secs = (hours * 3600.0).round() as i64;
    DateTime::from_timestamp(secs, 0).map(|d| d.naive_utc())
}

pub(crate) fn datetime_to_hours(dt: NaiveDateTime) -> f64 {
    dt.and_utc().timestamp() as f64 / 3600.0
}
