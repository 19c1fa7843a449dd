use thiserror::Error;

/// Errors produced by the recovery and isotropy routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An enumeration would exceed the configured subset budget. Raised
    /// explicitly instead of silently truncating the search.
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),

    #[error("invalid dependence witness: {0}")]
    Witness(String),

    /// Sampling exhausted `max_iterations` without finding a dependent
    /// subset. Signals that the inlier fraction is likely at most `d/n` or
    /// that the general-position condition fails.
    #[error("timed out after {iterations} sampling iterations")]
    Timeout { iterations: u64 },

    /// The determinant-gap peeling loop found no removable element, so
    /// the chosen threshold does not witness the determinant condition.
    #[error("determinant gap violated: {0}")]
    GapViolation(String),

    #[error("min-norm point did not converge (best minimum so far: {best})")]
    Convergence { best: f64 },

    /// Every candidate removal answered `inside` during a peeling scan,
    /// which is impossible when the preconditions hold.
    #[error("peeling got stuck: every candidate answered inside; preconditions violated")]
    Stuck,

    #[error("numerical evaluation failed: {0}")]
    Evaluation(String),

    #[error("degenerate direction: {0}")]
    DegenerateDirection(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
