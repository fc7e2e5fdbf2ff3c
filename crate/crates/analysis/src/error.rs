use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(String),

    /// Input admits no meaningful statistic (zero variance, all ties, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

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

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub fn category(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Degenerate(_) | Error::Singular(_) => "numeric",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Io(_) => "io",
            Error::Csv(_) | Error::Config(_) => "format",
        }
    }
}
