use thiserror::Error;

/// Errors produced anywhere in the planning and simulation stack.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("scenario generation failed: {0}")]
    Generation(String),

    /// A solver assignment did not have the one-cell-per-agent-per-step structure.
    #[error("plan extraction failed: {0}")]
    Extraction(String),

    /// The low-level planner could not cover the epoch goals within the cycle cap.
    #[error("planning problem is infeasible: {0}")]
    Infeasible(String),

    /// A plan produced internally failed independent validation.
    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("solver backend error: {0}")]
    Backend(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
