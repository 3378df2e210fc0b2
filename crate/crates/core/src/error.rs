use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vector norm {norm:e} is below the degeneracy floor")]
    DegenerateVector { norm: f64 },

    #[error("shape mismatch: expected length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("vector must have at least one entry")]
    EmptyVector,

    #[error("non-finite value {value} at index {index}")]
    NonFiniteEntry { index: usize, value: f64 },

    #[error("invalid radius {0}: must satisfy 0 < M <= |w*|")]
    InvalidRadius(f64),

    #[error("invalid beta {0}: must be positive")]
    InvalidBeta(f64),

    #[error("invalid search range [{lo}, {hi}] with step {step}")]
    InvalidRange { lo: f64, hi: f64, step: f64 },

    #[error("iteration {iteration} produced a non-finite iterate")]
    NonFinite { iteration: usize },

    #[error("step failed at iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trajectory did not converge: final step norm {step_norm:e} > tolerance {stop_tol:e}")]
    NotConverged { step_norm: f64, stop_tol: f64 },

    #[error("iterate norms leave the annulus: {0}")]
    AnnulusViolation(String),

    #[error("regression needs at least two distinct abscissae, got {0}")]
    DegenerateRegression(usize),

    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
