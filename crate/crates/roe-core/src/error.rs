use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's contract (length mismatch, stepping a
    /// finished episode, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid configuration (bad dimensions, unknown scenario, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A numeric computation produced a non-finite value.
    #[error("numeric error: {msg} [{diagnostics}]")]
    Numeric { msg: String, diagnostics: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
