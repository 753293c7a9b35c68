use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{CellKind, NadamConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One model over the anchors of every sensor.
    #[default]
    Mixed,
    /// An independent cascade per sensor.
    Separate,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(Mode::Mixed),
            "separate" => Ok(Mode::Separate),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    GlobalZscore,
    PerSensorZscore,
    None,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global_zscore" => Ok(Normalization::GlobalZscore),
            "per_sensor_zscore" => Ok(Normalization::PerSensorZscore),
            "none" => Ok(Normalization::None),
            other => Err(Error::Config(format!("unknown normalization `{other}`"))),
        }
    }
}

/// Training and cascade hyperparameters. Field names double as the keys of
/// the JSON run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Half-window: anchors span `2w + 1` entries.
    pub w: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub iter_num: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub cell_kind: CellKind,
    pub mode: Mode,
    /// Feed the current estimate of the center entry to both stacks.
    pub include_center_input: bool,
    pub normalization: Normalization,
    pub validation_fraction: f64,
    /// Carry weights and optimizer state from one round to the next; when
    /// false every round trains from a fresh initialization.
    pub warm_start: bool,
    /// Calendar months whose rows never supply training labels. Ignored for
    /// timestamps without a calendar.
    pub test_months: Vec<u32>,
    pub optimizer: NadamConfig,
    /// Run everything on one thread.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            w: 12,
            hidden: 50,
            dropout: 0.3,
            iter_num: 3,
            batch_size: 128,
            max_epochs: 50,
            patience: 5,
            seed: 0,
            cell_kind: CellKind::Standard,
            mode: Mode::Mixed,
            include_center_input: false,
            normalization: Normalization::GlobalZscore,
            validation_fraction: 0.1,
            warm_start: true,
            test_months: Vec::new(),
            optimizer: NadamConfig::default(),
            deterministic: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.w < 1 {
            return fail("w must be at least 1".into());
        }
        if self.hidden < 1 {
            return fail("hidden must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.iter_num < 1 {
            return fail("iter_num must be at least 1".into());
        }
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1".into());
        }
        if self.max_epochs < 1 {
            return fail("max_epochs must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return fail(format!(
                "validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            ));
        }
        if let Some(m) = self.test_months.iter().find(|m| !(1..=12).contains(*m)) {
            return fail(format!("month {m} is outside 1..=12"));
        }
        let o = &self.optimizer;
        if !(o.lr > 0.0 && (0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2) && o.epsilon > 0.0) {
            return fail(format!("invalid optimizer settings {o:?}"));
        }
        Ok(())
    }

    /// Steps read by each stack per sample.
    pub fn context_len(&self) -> usize {
        self.w + usize::from(self.include_center_input)
    }
}
