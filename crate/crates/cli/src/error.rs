use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

use nls_core::{EvolutionError, ExperimentError, GridError, ModelError, ModulationError, SolitonError, SpectralError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid input field: {0}")]
    Field(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Soliton(#[from] SolitonError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Modulation(#[from] ModulationError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{failed} of {total} sweep runs failed")]
    SweepFailures { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 1,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config { .. } => "config",
            CliError::Io { .. } => "io",
            CliError::Csv(_) => "csv",
            CliError::Json(_) => "json",
            CliError::Field(_) => "field",
            CliError::Model(_) => "model",
            CliError::Grid(_) => "grid",
            CliError::Soliton(_) => "soliton",
            CliError::Spectral(_) => "spectral",
            CliError::Evolution(_) => "evolution",
            CliError::Modulation(_) => "modulation",
            CliError::Experiment(_) => "experiment",
            CliError::SweepFailures { .. } => "sweep",
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() } }).to_string()
    }
}
