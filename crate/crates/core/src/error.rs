use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("dimension mismatch: expected {expected_rows}x{expected_cols}, found {rows}x{cols}")]
    DimensionMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("unknown fuel code {0}")]
    UnknownFuel(u32),

    #[error("non-binary scar value {0:?}")]
    NonBinary(String),

    #[error("invalid length-to-breadth ratio {0} (must be >= 1)")]
    InvalidLengthToBreadth(f64),

    #[error("imaginary eccentricity: flank ROS {fros} exceeds semi-major rate {semi_major}")]
    ImaginaryEccentricity { fros: f64, semi_major: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("wrong parameter vector length: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("optimizer: {0}")]
    Optimizer(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: msg.into(),
        }
    }

    /// True when the error stems from bad user input rather than a failure
    /// while running a valid request.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Optimizer(_) | Error::ImaginaryEccentricity { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
