//! Error type shared by all solver modules.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Failures reported by the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate weight: eps*|k|*ell = {0} must be < 1")]
    DegenerateWeight(f64),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("negative profile value {value:e} at t = {t}")]
    NegativeProfile { t: f64, value: f64 },

    #[error("phase optimization could not bracket a minimum; scan (alpha, energy): {table:?}")]
    Bracketing { table: Vec<(f64, f64)> },

    #[error("profile underflow at t = {t} (point ({x}, {y})): boundary weight undefined")]
    Underflow { t: f64, x: f64, y: f64 },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("mesh quality: {0}")]
    MeshQuality(String),

    #[error("line search stagnated after {iterations} iterations (gradient norm {grad_norm:e})")]
    Stagnation { iterations: usize, grad_norm: f64 },

    #[error("validation: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
