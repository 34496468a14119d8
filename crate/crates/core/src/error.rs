use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate denominator (all coefficients zero)")]
    DegenerateDenominator,

    #[error("improper transfer function (numerator degree {num} > denominator degree {den})")]
    Improper { num: usize, den: usize },

    #[error("system is not stable: pole at {}{:+}j", .pole.re, .pole.im)]
    Unstable { pole: Complex64 },

    #[error("frequency response evaluated at a pole (w = {0})")]
    AtPole(f64),

    #[error("matrix is zero")]
    ZeroMatrix,

    #[error("eigenvalue computation failed")]
    Eigen,

    #[error("hypothesis not met: {0}")]
    Hypothesis(String),

    #[error("simulation diverged at t = {t}")]
    Divergence { t: f64 },

    #[error("algebraic loop did not converge at t = {t} (residual {residual:e})")]
    IllPosed { t: f64, residual: f64 },

    #[error("system callback failed for input {id}: {reason}")]
    Callback { id: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
