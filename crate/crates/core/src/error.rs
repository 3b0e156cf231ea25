//! Error types shared across the crate.

/// Errors produced by models, scoring, decoding, and the provider protocol.
#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    /// A caller violated an API precondition (bad token id, unnormalized
    /// distribution, malformed configuration value, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A logit provider failed to serve a request. `retriable` marks
    /// transient failures (timeouts, broken pipes) as opposed to errors the
    /// provider reported about the request itself.
    #[error("provider error: {message}{}", if *.retriable { " (retriable)" } else { "" })]
    Provider { message: String, retriable: bool },

    /// Invalid configuration: unknown keys, unresolvable model specs,
    /// vocabulary-size mismatches negotiated over the wire.
    #[error("configuration error: {0}")]
    Config(String),

    /// Two models that must share a vocabulary do not.
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub fn contract(msg: impl Into<String>) -> Self {
        CoreError::Contract(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CoreError::Config(msg.into())
    }

    pub fn provider(msg: impl Into<String>, retriable: bool) -> Self {
        CoreError::Provider { message: msg.into(), retriable }
    }

    /// True for provider failures worth retrying (timeouts, lost streams).
    pub fn is_retriable(&self) -> bool {
        matches!(self, CoreError::Provider { retriable: true, .. })
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
