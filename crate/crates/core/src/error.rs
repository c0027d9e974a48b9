use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("universe size {n} exceeds the brute-force limit {limit}")]
    TooLarge { n: usize, limit: usize },

    /// The randomized solver ran out of restarts.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// An internal invariant of an algorithm did not hold.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
