//! Fixed-size windows centered on a target entry.

use crate::dataset::SensorDataset;
use crate::error::{Error, Result};

/// A window of `2w + 1` entries of one sensor centered on position `center`.
///
/// Slots outside the series are padded as unobserved, so every anchor has the
/// same length. Timestamps of padded slots are extrapolated with the median
/// step of the series.
#[derive(Clone, Debug, PartialEq)]
pub struct Anchor {
    pub sensor: usize,
    pub center: usize,
    /// Values at `center - w .. center - 1`; `None` when not observed.
    pub left: Vec<Option<f64>>,
    /// Values at `center + 1 .. center + w`; `None` when not observed.
    pub right: Vec<Option<f64>>,
    pub center_observed: bool,
    pub observed_count: usize,
    pub timestamps: Vec<f64>,
}

impl Anchor {
    pub fn half_window(&self) -> usize {
        self.left.len()
    }

    pub fn len(&self) -> usize {
        2 * self.half_window() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_valid(&self) -> bool {
        is_valid_count(self.observed_count, self.half_window())
    }
}

/// Strict majority rule: more than half of the `2w + 1` slots observed.
pub fn is_valid_count(observed: usize, w: usize) -> bool {
    2 * observed > 2 * w + 1
}

pub fn is_valid_anchor(anchor: &Anchor) -> bool {
    anchor.is_valid()
}

pub fn extract_anchor(dataset: &SensorDataset, sensor: usize, t: usize, w: usize) -> Result<Anchor> {
    if w == 0 {
        return Err(Error::Config("half-window must be at least 1".into()));
    }
    dataset.check_index(t, sensor)?;
    let n = dataset.num_timestamps() as isize;
    let slot = |pos: isize| -> Option<f64> {
        if pos < 0 || pos >= n {
            None
        } else {
            dataset.observed_value(pos as usize, sensor)
        }
    };
    let t_i = t as isize;
    let wi = w as isize;
    let left: Vec<_> = (t_i - wi..t_i).map(slot).collect();
    let right: Vec<_> = (t_i + 1..=t_i + wi).map(slot).collect();
    let center_observed = dataset.is_observed(t, sensor);
    let observed_count = left.iter().chain(&right).filter(|v| v.is_some()).count()
        + usize::from(center_observed);
    let timestamps = window_timestamps(dataset.timestamps(), dataset.median_step(), t, w);
    Ok(Anchor {
        sensor,
        center: t,
        left,
        right,
        center_observed,
        observed_count,
        timestamps,
    })
}

/// Timestamps of slots `t - w ..= t + w`, extrapolating past either end.
pub(crate) fn window_timestamps(times: &[f64], step: f64, t: usize, w: usize) -> Vec<f64> {
    let n = times.len() as isize;
    (t as isize - w as isize..=t as isize + w as isize)
        .map(|pos| {
            if pos < 0 {
                times[0] + pos as f64 * step
            } else if pos >= n {
                times[n as usize - 1] + (pos - n + 1) as f64 * step
            } else {
                times[pos as usize]
            }
        })
        .collect()
}

/// Per-sensor prefix counts of observed cells, for O(1) validity queries.
#[derive(Clone, Debug)]
pub struct ObservedCounts {
    // prefix[s][t] = observed cells of sensor s in rows 0..t
    prefix: Vec<Vec<usize>>,
}

impl ObservedCounts {
    pub fn new(dataset: &SensorDataset) -> Self {
        let prefix = (0..dataset.num_sensors())
            .map(|s| {
                let mut acc = Vec::with_capacity(dataset.num_timestamps() + 1);
                acc.push(0);
                let mut running = 0;
                for t in 0..dataset.num_timestamps() {
                    running += usize::from(dataset.is_observed(t, s));
                    acc.push(running);
                }
                acc
            })
            .collect();
        Self { prefix }
    }

    /// Observed cells of `sensor` within `t - w ..= t + w` (padding unobserved).
    pub fn in_window(&self, sensor: usize, t: usize, w: usize) -> usize {
        let p = &self.prefix[sensor];
        let n = p.len() - 1;
        let lo = t.saturating_sub(w);
        let hi = (t + w + 1).min(n);
        p[hi] - p[lo]
    }

    pub fn is_valid(&self, sensor: usize, t: usize, w: usize) -> bool {
        is_valid_count(self.in_window(sensor, t, w), w)
    }
}
