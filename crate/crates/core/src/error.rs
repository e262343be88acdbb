use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file contents (bad magic bytes, unparseable header, ...).
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    /// The file is well-formed but uses a feature this crate does not parse.
    /// `field` names the offending header field.
    #[error("{path}: unsupported {field}: {detail}")]
    Unsupported {
        path: PathBuf,
        field: &'static str,
        detail: String,
    },

    #[error("{path}: payload length mismatch: expected {expected} bytes, found {found}")]
    PayloadLength {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{path}: column '{column}' not found")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: cannot parse '{value}' as a number in column '{column}' at row {row}")]
    NumericCell {
        path: PathBuf,
        column: String,
        row: usize,
        value: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error(
        "degenerate stratification: {empty} of {n_bins} quantile bins are empty; use fewer bins"
    )]
    DegenerateStratification { n_bins: usize, empty: usize },

    #[error(
        "ill-conditioned system: Cholesky failed after jitter escalation (lambda={lambda:e}, size={size})"
    )]
    IllConditioned { lambda: f64, size: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{what} exceeds capacity: {actual} > {limit}")]
    Capacity {
        what: &'static str,
        limit: usize,
        actual: usize,
    },

    #[error("effective rank undefined: interaction matrix is zero")]
    UndefinedRank,
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error classes, used by binaries to pick a process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numeric,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. }
            | Error::Format { .. }
            | Error::Unsupported { .. }
            | Error::PayloadLength { .. }
            | Error::MissingColumn { .. }
            | Error::NumericCell { .. } => ErrorClass::Io,
            Error::InvalidArgument(_)
            | Error::Dimension { .. }
            | Error::DegenerateStratification { .. }
            | Error::Capacity { .. } => ErrorClass::Validation,
            Error::IllConditioned { .. } | Error::Numeric(_) | Error::UndefinedRank => {
                ErrorClass::Numeric
            }
        }
    }
}
