use thiserror::Error;

/// Errors raised across the imputation pipeline.
///
/// Variants are grouped by category so front ends can map them onto exit
/// codes (see [`Error::category`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of range: {0}")]
    Range(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("initialization error: {0}")]
    Init(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("non-finite value in `{param}`: {message}")]
    Numeric { param: String, message: String },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse error category used for exit codes and run manifests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::Range(_) => ErrorCategory::Config,
            Error::Numeric { .. } => ErrorCategory::Numeric,
            Error::Parse { .. }
            | Error::Data(_)
            | Error::Init(_)
            | Error::Training(_)
            | Error::Metric(_)
            | Error::Eval(_)
            | Error::Io(_)
            | Error::Json(_) => ErrorCategory::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
