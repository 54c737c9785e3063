use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("conductivity at ({row}, {col}) is {value}, must exceed {floor}")]
    NonPositiveConductivity { row: usize, col: usize, value: f64, floor: f64 },

    #[error("power is {power} W but the CPU segment is empty")]
    EmptyCpuSegment { power: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("singular system: pivot {pivot:e} at row {row} (pivot ratio estimate {condition:e})")]
    Singular { row: usize, pivot: f64, condition: f64 },

    #[error("pseudo-transient march did not converge in {iterations} steps (last change {change:e})")]
    NotConverged { iterations: usize, change: f64 },

    #[error("series too short: need at least {need}, got {got}")]
    SeriesTooShort { need: usize, got: usize },

    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("malformed {what} in {path}: {message}")]
    Parse { what: &'static str, path: PathBuf, message: String },

    #[error("checkpoint incompatible: {0}")]
    Checkpoint(String),

    #[error("run directory {path}: {message}")]
    RunDir { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::NonPositiveConductivity { .. }
                | Error::EmptyCpuSegment { .. }
                | Error::InvalidGrid(_)
                | Error::Config { .. }
                | Error::Parse { .. }
        )
    }
}
