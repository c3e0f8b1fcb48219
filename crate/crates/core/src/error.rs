use thiserror::Error;

use crate::conic::SolveStatus;
use crate::psca::TraceEntry;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed scenario file: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// No artificial-noise power up to the cap makes user `user_id` covert at slot `slot`.
    #[error("slot {slot}: user {user_id} cannot be scheduled covertly at any AN power up to the cap")]
    CovertInfeasible { slot: usize, user_id: u32 },

    #[error("flight period {period_s} s is shorter than the tour time {t_min_s} s; scale the trajectory instead")]
    InsufficientTime { period_s: f64, t_min_s: f64 },

    /// Carries the outer-iteration trace up to and including the failure.
    #[error("convex subproblem at outer iteration {iteration} ended with status {status:?}")]
    Solver { iteration: usize, status: SolveStatus, trace: Vec<TraceEntry> },

    #[error("rounded schedule violates the covertness constraint in slots {slots:?}")]
    Rounding { slots: Vec<usize> },

    #[error("degenerate linearization: {0}")]
    Degenerate(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
