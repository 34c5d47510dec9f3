use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum AoiError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("path-loss exponent alpha = {0} must exceed 2, the interference integral diverges otherwise")]
    DivergingIntegral(f64),

    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error:e}, tolerance {tol:e}")]
    Quadrature { estimate: f64, error: f64, tol: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last step {last_step:e})")]
    NonConvergent { iterations: usize, last_step: f64 },

    #[error("topology is empty, network metrics are undefined")]
    EmptyTopology,

    #[error("infinite age: p * mu = {0} must be positive")]
    InfiniteAge(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("key mismatch between inputs: {0}")]
    KeyMismatch(String),

    #[error("malformed CSV {path}: {reason}")]
    Schema { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AoiError {
    /// Stable identifier used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            AoiError::InvalidParameter { .. } => "invalid_parameter",
            AoiError::DivergingIntegral(_) => "diverging_integral",
            AoiError::Quadrature { .. } => "quadrature",
            AoiError::NonConvergent { .. } => "non_convergent",
            AoiError::EmptyTopology => "empty_topology",
            AoiError::InfiniteAge(_) => "infinite_age",
            AoiError::Config(_) => "config",
            AoiError::KeyMismatch(_) => "key_mismatch",
            AoiError::Schema { .. } => "schema",
            AoiError::Io { .. } => "io",
            AoiError::Csv(_) => "csv",
            AoiError::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AoiError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, AoiError>;
