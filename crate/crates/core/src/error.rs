use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an input contract (dimensions, signs, finiteness).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The rollout produced a non-finite state.
    #[error("rollout diverged: non-finite state produced at step {step}")]
    Divergence { step: usize },

    /// A bound formula was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The simplex did not terminate within its pivot budget.
    #[error("simplex exceeded {0} pivots")]
    PivotLimit(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
