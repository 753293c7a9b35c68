use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use iin_core::{Error, ErrorCategory};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Failure {
    pub category: ErrorCategory,
    pub exit_code: i32,
    pub message: String,
}

/// Everything needed to rerun a command: resolved config, seed, input
/// digests and the files it wrote.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub deterministic: bool,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub started: String,
    pub finished: Option<String>,
    pub artifacts: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub validation_mae: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<PathBuf>,
    pub status: &'static str,
    pub error: Option<Failure>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn exit_code(category: ErrorCategory) -> i32 {
    match category {
        ErrorCategory::Config => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Numeric => 4,
    }
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let digest = Sha256::digest(fs::read(path)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

impl Manifest {
    pub fn new(command: &str, deterministic: bool) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            args: std::env::args().skip(1).collect(),
            seed: None,
            deterministic,
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            started: now(),
            finished: None,
            artifacts: Vec::new(),
            validation_mae: Vec::new(),
            checkpoints: Vec::new(),
            status: "running",
            error: None,
        }
    }

    /// Records the digest of an input file before it is parsed.
    pub fn input(&mut self, path: &Path) -> iin_core::Result<()> {
        let sha256 = sha256_file(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(InputDigest {
            path: path.to_path_buf(),
            sha256,
        });
        Ok(())
    }

    pub fn finish(&mut self, result: &iin_core::Result<()>) {
        self.finished = Some(now());
        match result {
            Ok(()) => self.status = "ok",
            Err(e) => {
                let category = e.category();
                self.status = "error";
                self.error = Some(Failure {
                    category,
                    exit_code: exit_code(category),
                    message: e.to_string(),
                });
            }
        }
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::from)?;
        fs::write(path, text + "\n")
    }
}
