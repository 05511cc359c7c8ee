use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size overflow: {0}")]
    SizeOverflow(String),

    #[error("insufficient samples: need at least {needed} equations, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("rank-deficient least-squares system (condition estimate {cond:.3e})")]
    RankDeficient { cond: f64 },

    #[error(
        "rank-deficient candidate pool: only {found} of {requested} pivots above tolerance; \
         try a larger pool"
    )]
    RankDeficientPool { found: usize, requested: usize },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("solver diverged after {iterations} iterations (last residual {residual:.3e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("adjoint solve failed: {0}")]
    AdjointSolve(String),

    #[error("singular linear system at pivot {0}")]
    SingularMatrix(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
