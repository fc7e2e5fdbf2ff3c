use std::io;

use thiserror::Error;

/// Errors raised by the simulation and estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("arc length {s} outside track range [0, {length}]")]
    Range { s: f64, length: f64 },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unknown {kind} '{name}'")]
    Lookup { kind: &'static str, name: String },

    #[error("insufficient data: {what} (need {needed}, got {got})")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("degenerate regression: {0}")]
    DegenerateRegression(String),

    #[error("numeric failure at row {row}: {detail}")]
    NumericAbort { row: usize, detail: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Short machine-readable category, used for CLI diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Range { .. } | Error::Validation(_) | Error::Lookup { .. } => "validation",
            Error::InsufficientData { .. } => "insufficient-data",
            Error::DegenerateRegression(_) | Error::NumericAbort { .. } => "numeric",
            Error::Io(_) => "io",
            Error::Csv(_) | Error::Config(_) => "format",
        }
    }
}
