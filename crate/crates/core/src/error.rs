use thiserror::Error;

use crate::continuum::FitResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network specification: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("network is not irreducible: {0}")]
    Reducible(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("singular matrix in {context} (condition estimate {condition:.3e})")]
    Singular { context: String, condition: f64 },

    #[error("matrix is defective to working tolerance (reconstruction residual {residual:.3e})")]
    Defective { residual: f64 },

    #[error("null space has dimension {dimension}, expected 1")]
    NullSpaceDimension { dimension: usize },

    #[error("ambiguous eigenvalue matching: {0}")]
    MatchingAmbiguity(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("iteration cap reached after {} evaluations (best objective {:.6e})", .best.n_evals, .best.objective)]
    IterationCap { best: Box<FitResult> },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        Error::InvalidSpec(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
