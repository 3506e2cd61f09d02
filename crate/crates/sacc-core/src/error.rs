//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by scene construction, moment evaluation, the low-rank
/// machinery, fusion ops, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate head-size distribution: zero probability mass at every queried size")]
    DegenerateHeadSizeDistribution,

    #[error("no variance mass: diagonal is identically zero")]
    NoVarianceMass,

    #[error("grid too large for a dense covariance: {pixels} pixels exceeds the guard of {limit}")]
    CovGridTooLarge { pixels: usize, limit: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("singular quadratic form: non-positive jitter with a rank-deficient covariance")]
    SingularQuadraticForm,

    #[error(
        "eigendecomposition failed to converge on a {dim}x{dim} matrix \
         (max |entry| {max_abs:.3e}, diagonal range [{diag_min:.3e}, {diag_max:.3e}])"
    )]
    EigenFailed {
        dim: usize,
        max_abs: f64,
        diag_min: f64,
        diag_max: f64,
    },

    #[error("scale count mismatch: expected {expected} per-scale fields, got {got}")]
    ScaleCountMismatch { expected: usize, got: usize },

    #[error("dimension not divisible: {dim} {value} must be divisible by {divisor} for {op}")]
    DimensionNotDivisible {
        op: &'static str,
        dim: &'static str,
        value: usize,
        divisor: usize,
    },

    #[error("tensor shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("scale {input} cannot reach target {target}; legal targets: {legal}")]
    UnreachableScale {
        input: String,
        target: String,
        legal: String,
    },

    #[error("shape inconsistency at layer {index} ({kind}): {reason}")]
    GraphShape {
        index: usize,
        kind: String,
        reason: String,
    },

    #[error("optimization diverged: non-finite loss at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
