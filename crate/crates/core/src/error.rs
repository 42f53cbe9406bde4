use thiserror::Error;

/// Errors raised by models, rewards and decoders.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed a value outside an operation's domain.
    #[error("invalid input: {0}")]
    Input(String),
    /// A model, reward or decoder was configured inconsistently.
    #[error("configuration error: {0}")]
    Config(String),
    /// A model or table file could not be read or failed validation.
    #[error("load error: {0}")]
    Load(String),
    /// A probability computation left its valid range.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// An internal invariant was broken.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn load(msg: impl Into<String>) -> Self {
        Error::Load(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
