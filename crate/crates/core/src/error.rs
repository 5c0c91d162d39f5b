use std::io;

use thiserror::Error;

/// Errors raised by the detectors, the simulation harness and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("eigen iteration did not converge (dim {dim}, condition estimate {condition:e})")]
    EigenNoConvergence { dim: usize, condition: f64 },

    #[error("matrix is not positive definite: smallest eigenvalue {smallest:e} (largest {largest:e})")]
    NotPositiveDefinite { smallest: f64, largest: f64 },

    #[error("cholesky failed at pivot {index}: value {value:e}")]
    CholeskyPivot { index: usize, value: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("no positive root for scale equation: a = {a}, {len} eigenvalues, {zeros} of them zero (need zeros < a < len)")]
    GammaRoot { a: f64, len: usize, zeros: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("primary data is identically zero")]
    ZeroPrimary,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown detector '{0}'")]
    UnknownDetector(String),

    #[error("scenario hash mismatch: thresholds were calibrated for {expected}, config hashes to {found}")]
    ScenarioHashMismatch { expected: String, found: String },

    #[error("figure {0} is out of scope: requires the second-order GLR procedures, which are not implemented")]
    FigureOutOfScope(String),

    #[error("malformed file {path}: {reason}")]
    Parse { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
