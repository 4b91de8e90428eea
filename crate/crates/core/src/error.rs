use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("node index {index} out of range for a network of {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("node {0} is in the removed set")]
    NodeRemoved(usize),

    #[error("exact enumeration needs n <= {max} (got n = {n}); use a monte_carlo or walk risk")]
    TooLargeForExact { n: usize, max: usize },

    #[error("walk enumeration too large ({0}); use matrix_power mode")]
    WalkLimit(String),

    #[error("unknown activation function '{0}'")]
    UnknownActivation(String),

    #[error("alpha too small for asymptotic regime ({0})")]
    AsymptoticRegime(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
