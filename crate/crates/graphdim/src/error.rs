//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the estimation pipeline, generators and harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a contract (non-finite values, bad shapes, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A neighborhood whose points carry no variance at all; it cannot be
    /// re-expressed in PCA coordinates.
    #[error("degenerate neighborhood around point {index}")]
    DegenerateNeighborhood { index: usize },

    /// No neighborhood produced a usable local estimate.
    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    /// A data file could not be parsed; `row` is the 1-based line number and
    /// `column` the 1-based field number when known.
    #[error("parse error in {path} at row {row}{}: {message}", .column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        path: String,
        row: usize,
        column: Option<usize>,
        message: String,
    },

    /// An I/O failure, annotated with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code the CLI maps this error to:
    /// 1 usage error, 2 data error, 3 estimation failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidInput(_) | Error::InvalidParameter(_) => 1,
            Error::Parse { .. } | Error::Io { .. } => 2,
            Error::DegenerateNeighborhood { .. } | Error::EstimationFailed(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
