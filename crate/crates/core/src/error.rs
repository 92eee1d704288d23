use thiserror::Error;

/// Failures surfaced by the engine.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("stability violation: {0}")]
    StabilityViolation(String),

    #[error("dressed kernel is singular at kappa = {kappa}")]
    SingularMatrix { kappa: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("operation requires a two-oscillator chain, got N = {n}")]
    UnsupportedDimension { n: usize },

    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    #[error(
        "quadrature did not converge after {evaluations} evaluations \
         (estimate {estimate:e}, error {error:e}, requested {requested:e})"
    )]
    NonConvergence {
        estimate: f64,
        error: f64,
        requested: f64,
        evaluations: usize,
    },

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("consistency failure: {0}")]
    ConsistencyFailure(String),

    #[error("time step too coarse: {reason}; suggested dt <= {suggested_dt:e}")]
    StepTooCoarse { reason: String, suggested_dt: f64 },
}

impl Error {
    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
