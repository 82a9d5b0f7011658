use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical or numerical parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Configuration file failed schema or range validation.
    #[error("config error: {0}")]
    Config(String),

    /// Two spectra that must share a frequency grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("quadrature did not converge after {panels} panels (estimated error {error:e}, requested {requested:e})")]
    QuadratureNonConvergence { panels: usize, error: f64, requested: f64 },

    #[error("Bloch integration did not reach a periodic steady state (relative drift {drift:e} per period)")]
    SteadyStateNotReached { drift: f64 },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("unsupported unit conversion from {from} to {to}")]
    UnsupportedConversion { from: String, to: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } | Error::Config(_) | Error::UnsupportedConversion { .. } => 2,
            Error::GridMismatch(_)
            | Error::QuadratureNonConvergence { .. }
            | Error::SteadyStateNotReached { .. }
            | Error::FitFailed(_) => 3,
            Error::Io { .. } | Error::Csv { .. } | Error::Json(_) => 4,
        }
    }
}
