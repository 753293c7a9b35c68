//! Scoring against held-out ground truth.
//!
//! This is the only module that reads true values of held-out entries.

mod metrics;
mod report;
mod score;
mod study;

pub use metrics::{mae, mre};
pub use report::{write_rows, ReportRow, REPORT_CSV_HEADER};
pub use score::{score, score_series, EvalReport, IterationScore, ScenarioPair, ScenarioScore, SensorScore};
pub use study::{
    compare_initial_series, compare_initializers, sweep_missing_rates, sweep_seeds, InitializerComparison,
    DEFAULT_RATES,
};
