use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Krylov solver produced a non-finite iterate or hit non-positive
    /// curvature. `last` is the last finite iterate.
    #[error("solver breakdown at iteration {iteration}")]
    SolverBreakdown { iteration: usize, last: Vec<f64> },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("Anderson history has rank zero")]
    DegenerateHistory,

    #[error("iteration diverged at step {step}")]
    Divergence { step: usize },

    #[error("Newton iteration did not converge within {iterations} iterations")]
    NewtonNonConvergence { iterations: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
}
