use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad flags, config files, datasets or model files. Detected before any
    /// decoding starts.
    #[error("configuration error: {0}")]
    Config(String),
    /// Failure while decoding or writing results.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Self::Runtime(msg.into())
    }

    /// Process exit code: 2 for configuration errors, 3 for runtime errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 3,
        }
    }

    pub(crate) fn read(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Config(format!("cannot read {}: {e}", path.display()))
    }

    pub(crate) fn write(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Runtime(format!("cannot write {}: {e}", path.display()))
    }
}

/// Core errors raised while decoding are runtime failures; the harness maps
/// setup-time core errors to [`HarnessError::Config`] explicitly.
impl From<lookahead_core::Error> for HarnessError {
    fn from(e: lookahead_core::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

pub(crate) fn setup<T>(r: lookahead_core::Result<T>) -> Result<T> {
    r.map_err(|e| HarnessError::Config(e.to_string()))
}
