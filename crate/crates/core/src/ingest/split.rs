//! Train / validation / test partitioning.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::anchor::ObservedCounts;
use crate::dataset::SensorDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    /// Calendar months (1..=12) whose rows form the test set.
    pub test_months: Vec<u32>,
    pub validation_fraction: f64,
    /// Trailing share of rows used as test set when timestamps carry no
    /// calendar.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_months: vec![3, 6, 9, 12],
            validation_fraction: 0.1,
            test_fraction: 1.0 / 3.0,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation_fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if let Some(m) = self.test_months.iter().find(|m| !(1..=12).contains(*m)) {
            return Err(Error::Config(format!("month {m} is outside 1..=12")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Split {
    pub train: SensorDataset,
    /// `(t, sensor)` anchor centers of `train` reserved for validation.
    pub validation: BTreeSet<(usize, usize)>,
    pub test: SensorDataset,
    /// Rows of the source dataset that make up `train` and `test`.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

impl Split {
    /// Whether a cell of `train` may serve as a training label.
    pub fn is_train_label(&self, t: usize, sensor: usize) -> bool {
        self.train.is_observed(t, sensor) && !self.validation.contains(&(t, sensor))
    }
}

/// Picks `floor(fraction * candidates.len())` candidates uniformly at random.
pub fn choose_validation(
    candidates: &[(usize, usize)],
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> BTreeSet<(usize, usize)> {
    let count = (fraction * candidates.len() as f64).floor() as usize;
    sample(rng, candidates.len(), count)
        .into_iter()
        .map(|i| candidates[i])
        .collect()
}

/// Observed centers of valid anchors, row-major.
pub fn valid_label_centers(dataset: &SensorDataset, w: usize) -> Vec<(usize, usize)> {
    let counts = ObservedCounts::new(dataset);
    let mut out = Vec::new();
    for t in 0..dataset.num_timestamps() {
        for s in 0..dataset.num_sensors() {
            if dataset.is_observed(t, s) && counts.is_valid(s, t, w) {
                out.push((t, s));
            }
        }
    }
    out
}

/// Splits by calendar month when possible, otherwise by a trailing fraction.
pub fn split(dataset: &SensorDataset, spec: &SplitSpec, w: usize) -> Result<Split> {
    spec.validate()?;
    let rows = dataset.num_timestamps();
    let is_test: Vec<bool> = if dataset.time_format().has_calendar() {
        (0..rows)
            .map(|t| {
                dataset
                    .year_month(t)
                    .is_some_and(|(_, m)| spec.test_months.contains(&m))
            })
            .collect()
    } else {
        let cut = rows - (spec.test_fraction * rows as f64).round() as usize;
        (0..rows).map(|t| t >= cut).collect()
    };
    let train_rows: Vec<usize> = (0..rows).filter(|&t| !is_test[t]).collect();
    let test_rows: Vec<usize> = (0..rows).filter(|&t| is_test[t]).collect();
    if train_rows.is_empty() || test_rows.is_empty() {
        return Err(Error::Config(format!(
            "split leaves {} train and {} test rows",
            train_rows.len(),
            test_rows.len()
        )));
    }
    let train = dataset.select_rows(&train_rows);
    let test = dataset.select_rows(&test_rows);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let validation = choose_validation(&valid_label_centers(&train, w), spec.validation_fraction, &mut rng);
    Ok(Split {
        train,
        validation,
        test,
        train_rows,
        test_rows,
    })
}
