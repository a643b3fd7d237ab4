//! Exit-status policy and the JSON report schema the scoring commands
//! share.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use mfgnn_core::train::{DataError, Metrics, TrainError};

/// Anything the driver turns into a nonzero exit.
#[derive(Debug, Error)]
pub enum CliError {
    /// A named input (source, manifest, checkpoint, config) is absent.
    #[error("{0}")]
    Missing(String),
    /// Any failure after the inputs were found.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// Process exit status: 2 for absent inputs, 1 otherwise.
    pub fn status(&self) -> u8 {
        match self {
            CliError::Missing(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<DataError> for CliError {
    fn from(err: DataError) -> CliError {
        let absent = match &err {
            DataError::MissingFile { .. } => true,
            DataError::Io(io) => io.kind() == io::ErrorKind::NotFound,
            _ => false,
        };
        if absent {
            CliError::Missing(err.to_string())
        } else {
            CliError::Failed(err.to_string())
        }
    }
}

impl From<TrainError> for CliError {
    fn from(err: TrainError) -> CliError {
        match err {
            TrainError::Data(data) => CliError::from(data),
            TrainError::Io(io) if io.kind() == io::ErrorKind::NotFound => {
                CliError::Missing(format!("checkpoint i/o failed: {io}"))
            }
            other => CliError::Failed(other.to_string()),
        }
    }
}

/// Reads one input file, mapping absence to the dedicated exit status.
pub fn read_input(path: &Path) -> Result<String, CliError> {
    if !path.is_file() {
        return Err(CliError::Missing(format!("no such file: {}", path.display())));
    }
    fs::read_to_string(path).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}

/// Writes pretty-printed JSON with a trailing newline, creating parent
/// directories as needed.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
    text.push('\n');
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::Failed(format!("{}: {e}", parent.display())))?;
        }
    }
    fs::write(path, text).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}

/// Scoring report written by `train`, `clone`, and `eval`. Fields with
/// the same inputs serialize identically across runs, so repeated
/// evaluations can be compared byte for byte.
#[derive(Serialize)]
pub struct MetricsReport {
    /// "classify" or "clone".
    pub task: &'static str,
    /// Scored part of the manifest: train, val, test, or all.
    pub split: &'static str,
    /// Seed the numbers depend on: the model seed when training, the
    /// manifest's split seed when only evaluating.
    pub seed: u64,
    /// Variant label, e.g. `ast+control+data+typed+sum+attention`.
    pub variant: String,
    /// 1-based epoch of the saved snapshot; absent on plain evaluation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_val_score: Option<f64>,
    #[serde(flatten)]
    pub metrics: Metrics,
}
