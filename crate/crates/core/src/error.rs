use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |A - A^H| = {0:e})")]
    NotHermitian(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear program is infeasible")]
    LpInfeasible,

    #[error("linear program is unbounded")]
    LpUnbounded,

    #[error("simplex failed to terminate after {0} pivots")]
    LpCycling(usize),

    #[error("conic solver failed: {0}")]
    Solver(String),

    #[error("certificate rejected: {0}")]
    Certificate(String),

    #[error("problem exceeds size budget: {0}")]
    SizeBudget(String),

    #[error("optimizer did not converge (best value {best:.6e}, uncertified)")]
    NotConverged { best: f64 },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
