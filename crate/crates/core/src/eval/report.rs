use std::io::Write;

use super::score::{EvalReport, ScenarioPair, ScenarioScore};
use super::study::InitializerComparison;
use crate::error::Result;
use crate::numfmt::format_f64;

pub const REPORT_CSV_HEADER: [&str; 6] = ["scenario", "metric", "iteration", "rate", "sensor", "value"];

/// One line of the flat report table.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub scenario: String,
    pub metric: String,
    pub iteration: Option<usize>,
    pub rate: Option<f64>,
    pub sensor: String,
    pub value: f64,
}

const ALL: &str = "all";

fn scenario_rows(out: &mut Vec<ReportRow>, scenario: &str, s: &ScenarioScore, iteration: usize, rate: Option<f64>, sensor: &str) {
    for (metric, value) in [("mae", s.mae), ("mre", s.mre), ("entries", Some(s.entries as f64))] {
        if let Some(value) = value {
            out.push(ReportRow {
                scenario: scenario.into(),
                metric: metric.into(),
                iteration: Some(iteration),
                rate,
                sensor: sensor.into(),
                value,
            });
        }
    }
}

fn pair_rows(out: &mut Vec<ReportRow>, p: &ScenarioPair, iteration: usize, rate: Option<f64>, sensor: &str) {
    scenario_rows(out, "general", &p.general, iteration, rate, sensor);
    scenario_rows(out, "overall", &p.overall, iteration, rate, sensor);
}

impl EvalReport {
    pub fn final_iteration(&self) -> usize {
        self.trajectory.len().saturating_sub(1)
    }

    /// Flattened rows: final scores (all sensors, then each sensor), the
    /// trajectory, and per-round validation error.
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut out = Vec::new();
        let last = self.final_iteration();
        let totals = ScenarioPair {
            general: self.general.clone(),
            overall: self.overall.clone(),
        };
        pair_rows(&mut out, &totals, last, self.rate, ALL);
        for s in &self.per_sensor {
            pair_rows(&mut out, &s.scores, last, self.rate, &s.sensor);
        }
        for it in &self.trajectory {
            pair_rows(&mut out, &it.scores, it.iteration, self.rate, "trajectory");
        }
        for (round, v) in self.validation_mae.iter().enumerate() {
            out.push(ReportRow {
                scenario: "validation".into(),
                metric: "mae".into(),
                iteration: Some(round + 1),
                rate: self.rate,
                sensor: ALL.into(),
                value: *v,
            });
        }
        out
    }
}

impl InitializerComparison {
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut out = Vec::new();
        let last = self.report.final_iteration();
        for (scenario, iteration, value) in [
            ("overall", 0, self.init_mae),
            ("overall", last, self.final_mae),
            ("general", 0, self.init_general_mae),
            ("general", last, self.final_general_mae),
        ] {
            if let Some(value) = value {
                out.push(ReportRow {
                    scenario: scenario.into(),
                    metric: "mae".into(),
                    iteration: Some(iteration),
                    rate: None,
                    sensor: self.initializer.clone(),
                    value,
                });
            }
        }
        out
    }
}

pub fn write_rows<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_CSV_HEADER).map_err(std::io::Error::from)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.metric.clone(),
            r.iteration.map(|i| i.to_string()).unwrap_or_default(),
            r.rate.map(format_f64).unwrap_or_default(),
            r.sensor.clone(),
            format_f64(r.value),
        ])
        .map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}
