use thiserror::Error;

/// Errors reported by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid interval system: {0}")]
    InvalidIntervals(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("evaluation at pole c = {0}")]
    AtPole(f64),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("iterate left the feasible region: {0}")]
    Infeasible(String),
    #[error("block {0} outside the stored window")]
    OutOfWindow(i64),
    #[error("class margin violated: {quantity} = {value:e} at block {block}")]
    Margin {
        quantity: String,
        value: f64,
        block: i64,
    },
    #[error("singular local system: {0}")]
    Singular(String),
    #[error("lanczos breakdown at step {0}")]
    Breakdown(usize),
    #[error("dual-path discrepancy {value:e} exceeds {tol:e}")]
    Discrepancy { value: f64, tol: f64 },
    #[error("root count mismatch: expected {expected}, found {found}")]
    RootCount { expected: usize, found: usize },
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
