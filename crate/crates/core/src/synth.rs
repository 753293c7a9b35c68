//! Correlated synthetic sensor fixtures.
//!
//! Every sensor follows a shared level plus a sum of sinusoids. Sensors after
//! the first get their own phase offsets and amplitude factors; all sensors
//! get seeded Gaussian noise.

use std::f64::consts::TAU;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{SensorDataset, TimeFormat};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    /// Period in time steps.
    pub period: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub sensors: usize,
    pub steps: usize,
    pub seed: u64,
    pub level: f64,
    pub components: Vec<Component>,
    /// Half-width of the uniform per-sensor phase offset, radians.
    pub phase_jitter: f64,
    /// Half-width of the uniform per-sensor relative amplitude change.
    pub amplitude_jitter: f64,
    pub noise_std: f64,
    /// Epoch hour of the first row.
    pub start_hour: i64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            sensors: 3,
            steps: 2000,
            seed: 1,
            level: 5.0,
            components: vec![
                Component { period: 24.0, amplitude: 1.0 },
                Component { period: 12.0, amplitude: 0.5 },
                Component { period: 168.0, amplitude: 0.8 },
            ],
            phase_jitter: 0.25,
            amplitude_jitter: 0.2,
            noise_std: 0.1,
            start_hour: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sensors == 0 || self.steps == 0 {
            return Err(Error::Config("sensors and steps must be positive".into()));
        }
        if self.components.is_empty() || self.components.iter().any(|c| !(c.period > 0.0)) {
            return Err(Error::Config("every component needs a positive period".into()));
        }
        if !(self.noise_std >= 0.0 && self.phase_jitter >= 0.0 && self.amplitude_jitter >= 0.0) {
            return Err(Error::Config("noise and jitter must be non-negative".into()));
        }
        Ok(())
    }

    /// One-line description of every generator parameter.
    pub fn describe(&self) -> String {
        let comps: Vec<String> = self
            .components
            .iter()
            .map(|c| format!("{}x{}", c.amplitude, c.period))
            .collect();
        format!(
            "synthetic sensors={} steps={} seed={} level={} components(amplitude x period)=[{}] phase_jitter={} amplitude_jitter={} noise_std={} start_hour={}",
            self.sensors,
            self.steps,
            self.seed,
            self.level,
            comps.join(","),
            self.phase_jitter,
            self.amplitude_jitter,
            self.noise_std,
            self.start_hour
        )
    }
}

/// Noise-free value of one sensor at step `t`.
pub fn clean_value(spec: &SynthSpec, phases: &[f64], gains: &[f64], t: usize) -> f64 {
    spec.level
        + spec
            .components
            .iter()
            .zip(phases.iter().zip(gains))
            .map(|(c, (p, g))| g * c.amplitude * (TAU * t as f64 / c.period + p).sin())
            .sum::<f64>()
}

pub fn generate(spec: &SynthSpec) -> Result<SensorDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let k = spec.components.len();
    let mut values = Array2::zeros((spec.steps, spec.sensors));
    for s in 0..spec.sensors {
        let (phases, gains): (Vec<f64>, Vec<f64>) = if s == 0 {
            (vec![0.0; k], vec![1.0; k])
        } else {
            (0..k)
                .map(|_| {
                    let p = jitter(&mut rng, spec.phase_jitter);
                    let g = 1.0 + jitter(&mut rng, spec.amplitude_jitter);
                    (p, g)
                })
                .unzip()
        };
        for t in 0..spec.steps {
            values[(t, s)] = clean_value(spec, &phases, &gains, t);
        }
    }
    if spec.noise_std > 0.0 {
        values.mapv_inplace(|v| v + noise.sample(&mut rng));
    }
    SensorDataset::from_matrix(
        (0..spec.sensors).map(|s| format!("s{s}")).collect(),
        (0..spec.steps).map(|t| (spec.start_hour + t as i64) as f64).collect(),
        TimeFormat::EpochHours,
        values,
        "value",
    )
}

fn jitter(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    if half_width > 0.0 {
        rng.random_range(-half_width..half_width)
    } else {
        0.0
    }
}
