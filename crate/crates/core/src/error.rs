use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed overlap matrix: {0}")]
    MalformedOverlap(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("data integrity violation: {0}")]
    DataIntegrity(String),

    #[error("draw budget exceeded: {requested} index draws per replica, budget is {budget}")]
    BudgetExceeded { requested: u64, budget: u64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
