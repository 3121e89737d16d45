use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A value-level precondition of an elementary operation was violated
    /// (log of a non-positive number, division by zero, ...).
    #[error("domain error: {0}")]
    Domain(&'static str),

    /// The point lies in the polar band where the spherical chart degenerates.
    #[error("chart singularity: |x3| = {x3} is within the excluded polar band")]
    ChartSingularity { x3: f64 },

    /// The requested operation does not exist on this manifold.
    #[error("operation not supported on manifold {0}")]
    UnsupportedManifold(String),

    /// A kernel smoothness parameter is outside the admissible range.
    #[error("invalid smoothness alpha = {alpha}: {reason}")]
    InvalidAlpha { alpha: f64, reason: &'static str },

    /// A point violates the invariants of its manifold.
    #[error("invalid point: {0}")]
    InvalidPoint(&'static str),

    /// Dimension mismatch between inputs.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Every rung of the jitter ladder failed to factorize the Gram matrix.
    #[error("Stein Gram matrix is not positive definite even with jitter {max_jitter:e}")]
    NotPositiveDefinite { max_jitter: f64 },

    /// An integrand returned a non-finite value on a quadrature node.
    #[error("integrand is not finite at quadrature node {node}")]
    NonFiniteIntegrand { node: usize },

    /// Importance weights sum to zero or are not finite.
    #[error("importance weights are degenerate")]
    DegenerateWeights,

    /// The posterior is not integrable (the kappa tail does not decay).
    #[error("posterior not integrable: c0 + n = {shape} must exceed R_n = {rn}")]
    NotIntegrable { shape: f64, rn: f64 },

    /// Malformed textual input (pole data, ...), with 1-based line number.
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A parsed record is well-formed but fails validation.
    #[error("validation error on line {line}: {message}")]
    Validation { line: usize, message: String },

    /// Generic invalid argument.
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
