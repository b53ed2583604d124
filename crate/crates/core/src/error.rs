use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("point {0} lies outside the window")]
    OutsideWindow(String),

    #[error("site {0} is not occupied")]
    Unoccupied(String),

    #[error("empty set: {0}")]
    EmptySet(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("scale ladder invariant violated: {0}")]
    Ladder(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("path construction failed: {0}")]
    Construction(String),

    #[error("need at least {needed} effective trials, got {got}")]
    InsufficientTrials { needed: usize, got: usize },

    #[error("malformed config file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
