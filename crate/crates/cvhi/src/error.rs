use thiserror::Error;

/// Crate-wide error type. Numerical routines never panic on bad input;
/// they return one of these instead.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data (files, dimensions, set data).
    #[error("input error: {0}")]
    Input(String),

    /// A stated precondition was violated (infeasible candidate, x = 0, ...).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The requested quantity is not defined for this object.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The supremum is unbounded for this direction/set.
    #[error("unbounded: {0}")]
    Unbounded(String),

    /// An iterative kernel failed to reach its tolerance. Carries the best
    /// residual or bracket it achieved.
    #[error("numerical failure in {context}: best residual {residual:.3e}")]
    Numerical { context: String, residual: f64 },

    /// Solver ran out of iterations. Best iterate and gaps are preserved.
    #[error("no certificate after {outer_iters} outer iterations (best joint gap {best_gap:.3e})")]
    NonConvergence {
        outer_iters: usize,
        best_gap: f64,
        best_u: Vec<f64>,
        best_w: Vec<f64>,
    },

    /// The a-priori bound machinery found the constant system inconsistent.
    #[error("no finite a-priori bound derivable: {0}")]
    NoFiniteBound(String),

    /// Grid budget or dimension guard exceeded.
    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
