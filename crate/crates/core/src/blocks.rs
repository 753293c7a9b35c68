//! Spatial and temporal missing blocks, and the scoring scenario of an entry.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::dataset::SensorDataset;

/// Default minimum length of a per-sensor missing run counted as a block.
pub const DEFAULT_TEMPORAL_BLOCK_LEN: usize = 11;

/// A maximal run of non-observed entries of one sensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Run {
    pub start: usize,
    pub len: usize,
}

impl Run {
    pub fn contains(&self, t: usize) -> bool {
        t >= self.start && t < self.start + self.len
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockClassification {
    /// Rows where no sensor is observed.
    pub spatial_blocks: BTreeSet<usize>,
    /// Per sensor, maximal non-observed runs of length >= the threshold.
    pub temporal_blocks: Vec<Vec<Run>>,
    pub min_run: usize,
}

/// Where an entry falls for scoring purposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Scenario {
    /// Missing, and outside every spatial and temporal block.
    GeneralMissing,
    /// Missing inside a block: scored only in the overall scenario.
    OverallOnly,
    NotMissing,
}

/// Holdout cells count as missing here.
pub fn classify_blocks(dataset: &SensorDataset, min_run: usize) -> BlockClassification {
    let min_run = min_run.max(1);
    let rows = dataset.num_timestamps();
    let cols = dataset.num_sensors();
    let spatial_blocks = (0..rows)
        .filter(|&t| cols > 0 && (0..cols).all(|s| !dataset.is_observed(t, s)))
        .collect();
    let temporal_blocks = (0..cols)
        .map(|s| {
            missing_runs((0..rows).map(|t| !dataset.is_observed(t, s)))
                .into_iter()
                .filter(|r| r.len >= min_run)
                .collect()
        })
        .collect();
    BlockClassification {
        spatial_blocks,
        temporal_blocks,
        min_run,
    }
}

/// Maximal runs of `true` in a boolean sequence.
pub fn missing_runs(missing: impl IntoIterator<Item = bool>) -> Vec<Run> {
    let mut runs = Vec::new();
    let mut current: Option<Run> = None;
    for (t, m) in missing.into_iter().enumerate() {
        match (&mut current, m) {
            (Some(run), true) => run.len += 1,
            (None, true) => current = Some(Run { start: t, len: 1 }),
            (Some(_), false) => runs.push(current.take().unwrap()),
            (None, false) => {}
        }
    }
    runs.extend(current);
    runs
}

impl BlockClassification {
    pub fn in_block(&self, t: usize, sensor: usize) -> bool {
        self.spatial_blocks.contains(&t)
            || self
                .temporal_blocks
                .get(sensor)
                .is_some_and(|runs| runs.iter().any(|r| r.contains(t)))
    }
}

pub fn scenario_membership(
    dataset: &SensorDataset,
    blocks: &BlockClassification,
    t: usize,
    sensor: usize,
) -> Scenario {
    if dataset.is_observed(t, sensor) {
        Scenario::NotMissing
    } else if blocks.in_block(t, sensor) {
        Scenario::OverallOnly
    } else {
        Scenario::GeneralMissing
    }
}
