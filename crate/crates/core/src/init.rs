//! Statistical first guesses for every non-observed cell.
//!
//! The network needs a dense input series before its first round, so every
//! Missing or Holdout cell gets a finite estimate here. Observed cells pass
//! through untouched. Whatever a chosen initializer cannot fill is completed
//! with the temporally nearest observation.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::SensorDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitializerKind {
    /// Nearest observation in time; ties go to the earlier one.
    TemporalNearest,
    /// Mean of observations within `±width` rows.
    WindowMean { width: usize },
    /// Mean of all observations of all sensors.
    GlobalMean,
    /// Equal-weight average of an inverse-distance-weighted cross-sensor
    /// estimate and a forward simple-exponential-smoothing estimate.
    SpatialTemporalCombo { idw_power: f64, ses_alpha: f64 },
}

impl InitializerKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InitializerKind::WindowMean { width: 0 } => {
                Err(Error::Config("window-mean width must be at least 1".into()))
            }
            InitializerKind::SpatialTemporalCombo { idw_power, ses_alpha } => {
                if !(idw_power > 0.0) {
                    return Err(Error::Config(format!("idw_power must be > 0, got {idw_power}")));
                }
                if !(ses_alpha > 0.0 && ses_alpha <= 1.0) {
                    return Err(Error::Config(format!("ses_alpha must lie in (0, 1], got {ses_alpha}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Short stable label for reports.
    pub fn label(&self) -> String {
        match self {
            InitializerKind::TemporalNearest => "temporal_nearest".into(),
            InitializerKind::WindowMean { width } => format!("window_mean({width})"),
            InitializerKind::GlobalMean => "global_mean".into(),
            InitializerKind::SpatialTemporalCombo { idw_power, ses_alpha } => {
                format!("idw_ses({idw_power},{ses_alpha})")
            }
        }
    }
}

impl std::str::FromStr for InitializerKind {
    type Err = Error;

    /// Parses `nearest`, `window-mean[:W]`, `global-mean`, `idw-ses[:P:A]`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default();
        let num = |p: Option<&str>, default: f64| -> Result<f64> {
            p.map_or(Ok(default), |v| {
                v.parse().map_err(|_| Error::Config(format!("bad initializer parameter `{v}`")))
            })
        };
        let kind = match head {
            "nearest" | "temporal-nearest" => InitializerKind::TemporalNearest,
            "window-mean" => InitializerKind::WindowMean {
                width: num(parts.next(), 3.0)? as usize,
            },
            "global-mean" => InitializerKind::GlobalMean,
            "idw-ses" => InitializerKind::SpatialTemporalCombo {
                idw_power: num(parts.next(), 2.0)?,
                ses_alpha: num(parts.next(), 0.5)?,
            },
            other => return Err(Error::Config(format!("unknown initializer `{other}`"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

pub fn initialize(dataset: &SensorDataset, kind: &InitializerKind) -> Result<Array2<f64>> {
    initialize_with_coordinates(dataset, kind, None)
}

/// `coordinates[s]` gives sensor `s`'s planar position; sensors without one
/// (or a `None` argument) get uniform cross-sensor weights.
pub fn initialize_with_coordinates(
    dataset: &SensorDataset,
    kind: &InitializerKind,
    coordinates: Option<&[Option<(f64, f64)>]>,
) -> Result<Array2<f64>> {
    kind.validate()?;
    let mut dense = dataset.values().clone();
    match *kind {
        InitializerKind::TemporalNearest => {}
        InitializerKind::WindowMean { width } => {
            for s in 0..dataset.num_sensors() {
                fill_window_mean(dataset, s, width, &mut dense);
            }
        }
        InitializerKind::GlobalMean => {
            let observed: Vec<f64> = (0..dataset.num_timestamps())
                .flat_map(|t| (0..dataset.num_sensors()).filter_map(move |s| dataset.observed_value(t, s)))
                .collect();
            if observed.is_empty() {
                return Err(Error::Init("dataset has no observed values".into()));
            }
            let mean = observed.iter().sum::<f64>() / observed.len() as f64;
            dense.mapv_inplace(|v| if v.is_nan() { mean } else { v });
        }
        InitializerKind::SpatialTemporalCombo { idw_power, ses_alpha } => {
            fill_combo(dataset, idw_power, ses_alpha, coordinates, &mut dense)?;
        }
    }
    for s in 0..dataset.num_sensors() {
        if (0..dataset.num_timestamps()).any(|t| dense[(t, s)].is_nan()) {
            fill_temporal_nearest(dataset, s, &mut dense)?;
        }
    }
    debug_assert!(dense.iter().all(|v| v.is_finite()));
    Ok(dense)
}

fn observed_rows(dataset: &SensorDataset, sensor: usize) -> Vec<usize> {
    (0..dataset.num_timestamps())
        .filter(|&t| dataset.is_observed(t, sensor))
        .collect()
}

fn fill_temporal_nearest(dataset: &SensorDataset, sensor: usize, dense: &mut Array2<f64>) -> Result<()> {
    let rows = observed_rows(dataset, sensor);
    if rows.is_empty() {
        return Err(Error::Init(format!(
            "sensor `{}` has no observed values to fall back on",
            dataset.sensor_ids()[sensor]
        )));
    }
    let times = dataset.timestamps();
    let mut next = 0;
    for t in 0..dataset.num_timestamps() {
        while next < rows.len() && rows[next] < t {
            next += 1;
        }
        if !dense[(t, sensor)].is_nan() {
            continue;
        }
        let before = next.checked_sub(1).map(|i| rows[i]);
        let after = rows.get(next).copied();
        let pick = match (before, after) {
            (Some(b), Some(a)) => {
                if times[a] - times[t] < times[t] - times[b] {
                    a
                } else {
                    b
                }
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => unreachable!("sensor has observations"),
        };
        dense[(t, sensor)] = dataset.values()[(pick, sensor)];
    }
    Ok(())
}

fn fill_window_mean(dataset: &SensorDataset, sensor: usize, width: usize, dense: &mut Array2<f64>) {
    let n = dataset.num_timestamps();
    for t in 0..n {
        if dataset.is_observed(t, sensor) {
            continue;
        }
        let lo = t.saturating_sub(width);
        let hi = (t + width).min(n - 1);
        let (sum, count) = (lo..=hi)
            .filter_map(|u| dataset.observed_value(u, sensor))
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if count > 0 {
            dense[(t, sensor)] = sum / count as f64;
        }
    }
}

/// Inverse-distance weights of the other sensors relative to `target`,
/// normalised to sum to one. Co-located sensors (distance zero) take all of
/// the weight, shared equally among them.
pub fn spatial_weights(
    positions: &[Option<(f64, f64)>],
    target: usize,
    power: f64,
) -> Result<Vec<(usize, f64)>> {
    let distances = distances_from(positions, target)
        .ok_or_else(|| Error::Init(format!("sensor {target} has no coordinates")))?;
    if distances.is_empty() {
        return Err(Error::Init(format!(
            "no other sensor with coordinates near sensor {target}"
        )));
    }
    Ok(idw_normalise(&distances, power))
}

fn distances_from(positions: &[Option<(f64, f64)>], target: usize) -> Option<Vec<(usize, f64)>> {
    let (x0, y0) = positions.get(target).copied().flatten()?;
    Some(
        positions
            .iter()
            .enumerate()
            .filter(|(s, _)| *s != target)
            .filter_map(|(s, p)| p.map(|(x, y)| (s, (x - x0).hypot(y - y0))))
            .collect(),
    )
}

fn idw_normalise(distances: &[(usize, f64)], power: f64) -> Vec<(usize, f64)> {
    let colocated = distances.iter().filter(|(_, d)| *d == 0.0).count();
    let raw: Vec<(usize, f64)> = if colocated > 0 {
        distances
            .iter()
            .map(|&(s, d)| (s, if d == 0.0 { 1.0 } else { 0.0 }))
            .collect()
    } else {
        distances.iter().map(|&(s, d)| (s, d.powf(-power))).collect()
    };
    let total: f64 = raw.iter().map(|(_, w)| w).sum();
    raw.into_iter().map(|(s, w)| (s, w / total)).collect()
}

fn fill_combo(
    dataset: &SensorDataset,
    power: f64,
    alpha: f64,
    coordinates: Option<&[Option<(f64, f64)>]>,
    dense: &mut Array2<f64>,
) -> Result<()> {
    let n = dataset.num_timestamps();
    let m = dataset.num_sensors();
    for s in 0..m {
        // uniform weights when positions are unknown
        let distances = coordinates
            .and_then(|c| distances_from(c, s))
            .unwrap_or_else(|| (0..m).filter(|&o| o != s).map(|o| (o, 1.0)).collect());
        let mut level: Option<f64> = None;
        for t in 0..n {
            if let Some(v) = dataset.observed_value(t, s) {
                level = Some(match level {
                    None => v,
                    Some(l) => alpha * v + (1.0 - alpha) * l,
                });
                continue;
            }
            let available: Vec<(usize, f64)> = distances
                .iter()
                .copied()
                .filter(|&(o, _)| dataset.is_observed(t, o))
                .collect();
            let spatial = (!available.is_empty()).then(|| {
                idw_normalise(&available, power)
                    .into_iter()
                    .map(|(o, w)| w * dataset.values()[(t, o)])
                    .sum::<f64>()
            });
            let estimate = match (spatial, level) {
                (Some(a), Some(b)) => 0.5 * (a + b),
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => f64::NAN,
            };
            dense[(t, s)] = estimate;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TimeFormat;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const NA: f64 = f64::NAN;

    fn columns(cols: &[&[f64]]) -> SensorDataset {
        let rows = cols[0].len();
        let v = Array2::from_shape_fn((rows, cols.len()), |(t, s)| cols[s][t]);
        SensorDataset::from_matrix(
            (0..cols.len()).map(|s| format!("s{s}")).collect(),
            (0..rows).map(|t| t as f64).collect(),
            TimeFormat::EpochHours,
            v,
            "x",
        )
        .unwrap()
    }

    #[test]
    fn nearest_tie_prefers_earlier() {
        let d = columns(&[&[5., NA, 9.]]);
        let out = initialize(&d, &InitializerKind::TemporalNearest).unwrap();
        assert_eq!(out[(1, 0)], 5.0);
    }

    #[test]
    fn nearest_uses_time_distance() {
        let d = columns(&[&[5., NA, NA, 9.]]);
        let out = initialize(&d, &InitializerKind::TemporalNearest).unwrap();
        assert_eq!(out.column(0).to_vec(), vec![5., 5., 9., 9.]);
    }

    #[test]
    fn window_mean_averages_neighbours() {
        let d = columns(&[&[5., NA, 9.]]);
        let out = initialize(&d, &InitializerKind::WindowMean { width: 1 }).unwrap();
        assert_eq!(out[(1, 0)], 7.0);
    }

    #[test]
    fn window_mean_falls_back_to_nearest() {
        let d = columns(&[&[5., NA, NA, NA, NA, 9.]]);
        let out = initialize(&d, &InitializerKind::WindowMean { width: 1 }).unwrap();
        assert_eq!(out.column(0).to_vec(), vec![5., 5., 5., 9., 9., 9.]);
    }

    #[test]
    fn sensor_without_observations_is_an_error() {
        let d = columns(&[&[1., 2.], &[NA, NA]]);
        assert!(matches!(
            initialize(&d, &InitializerKind::TemporalNearest),
            Err(Error::Init(_))
        ));
        // cross-sensor initializers can still fill it
        let out = initialize(&d, &InitializerKind::GlobalMean).unwrap();
        assert_eq!(out[(0, 1)], 1.5);
    }

    #[test]
    fn weights_two_sensors_power_one() {
        let pos = [Some((0.0, 0.0)), Some((1.0, 0.0)), Some((0.0, 2.0))];
        let w = spatial_weights(&pos, 0, 1.0).unwrap();
        assert_relative_eq!(w[0].1, 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(w[1].1, 1.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn weights_single_and_symmetric() {
        let w = spatial_weights(&[Some((0.0, 0.0)), Some((3.0, 4.0))], 0, 2.0).unwrap();
        assert_eq!(w, vec![(1, 1.0)]);
        let pos = [Some((0.0, 0.0)), Some((1.0, 0.0)), Some((0.0, 1.0))];
        let w = spatial_weights(&pos, 0, 2.0).unwrap();
        assert_eq!(w, vec![(1, 0.5), (2, 0.5)]);
    }

    #[test]
    fn colocated_sensors_take_all_weight() {
        let pos = [Some((0.0, 0.0)), Some((0.0, 0.0)), Some((5.0, 0.0))];
        let w = spatial_weights(&pos, 0, 1.0).unwrap();
        assert_eq!(w, vec![(1, 1.0), (2, 0.0)]);
    }

    #[test]
    fn combo_blends_spatial_and_smoothed() {
        // sensor 0 missing at t=2; sensor 1 observed there with 10
        let d = columns(&[&[2., 4., NA], &[0., 0., 10.]]);
        let kind = InitializerKind::SpatialTemporalCombo { idw_power: 1.0, ses_alpha: 0.5 };
        let out = initialize(&d, &kind).unwrap();
        // ses level: 2 -> 0.5*4 + 0.5*2 = 3; spatial = 10
        assert_eq!(out[(2, 0)], 6.5);
    }

    #[test]
    fn combo_with_neither_component_uses_nearest() {
        let d = columns(&[&[NA, 4.], &[NA, 1.]]);
        let kind = InitializerKind::SpatialTemporalCombo { idw_power: 1.0, ses_alpha: 0.5 };
        let out = initialize(&d, &kind).unwrap();
        assert_eq!(out[(0, 0)], 4.0);
        assert_eq!(out[(0, 1)], 1.0);
    }

    #[test]
    fn parses_cli_tokens() {
        assert_eq!("nearest".parse::<InitializerKind>().unwrap(), InitializerKind::TemporalNearest);
        assert_eq!(
            "window-mean:4".parse::<InitializerKind>().unwrap(),
            InitializerKind::WindowMean { width: 4 }
        );
        assert!("idw-ses:1:0".parse::<InitializerKind>().is_err());
    }

    fn kinds() -> Vec<InitializerKind> {
        vec![
            InitializerKind::TemporalNearest,
            InitializerKind::WindowMean { width: 2 },
            InitializerKind::GlobalMean,
            InitializerKind::SpatialTemporalCombo { idw_power: 2.0, ses_alpha: 0.3 },
        ]
    }

    proptest! {
        #[test]
        fn observed_pass_through_and_finite(
            cells in proptest::collection::vec(proptest::option::weighted(0.6, -50.0f64..50.0), 24)
        ) {
            let mut vals: Vec<f64> = cells.iter().map(|c| c.unwrap_or(NA)).collect();
            vals[0] = 1.0;
            vals[12] = 2.0;
            let (a, b) = vals.split_at(12);
            let d = columns(&[a, b]);
            for kind in kinds() {
                let out = initialize(&d, &kind).unwrap();
                prop_assert!(out.iter().all(|v| v.is_finite()));
                for t in 0..12 {
                    for s in 0..2 {
                        if let Some(v) = d.observed_value(t, s) {
                            prop_assert_eq!(out[(t, s)].to_bits(), v.to_bits());
                        }
                    }
                }
            }
        }

        #[test]
        fn constant_series_stays_constant(
            c in -100.0f64..100.0,
            holes in proptest::collection::vec(any::<bool>(), 16)
        ) {
            let mut vals: Vec<f64> = holes.iter().map(|h| if *h { NA } else { c }).collect();
            vals[5] = c;
            let d = columns(&[&vals]);
            for kind in [
                InitializerKind::TemporalNearest,
                InitializerKind::WindowMean { width: 2 },
                InitializerKind::GlobalMean,
            ] {
                let out = initialize(&d, &kind).unwrap();
                for v in out.iter() {
                    prop_assert!((v - c).abs() <= 1e-12 * c.abs().max(1.0));
                }
            }
        }
    }
}
