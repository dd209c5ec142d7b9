//! Shared error type.

use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates an operation's preconditions.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// Inputs are structurally valid but the requested quantity does not
    /// exist for them (empty selection, zero channel, and so on).
    #[error("domain error: {0}")]
    Domain(String),
    /// An iterative solver exhausted its budget without meeting its contract.
    #[error("solver error: {0}")]
    Solver(String),
    /// A binary input file does not match the expected layout.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },
    /// A configuration document failed to parse or validate.
    #[error("config error (line {line}, key `{key}`): {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },
    /// A lower-level error annotated with where it happened.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parameter(message: impl Into<String>) -> Self {
        Error::Parameter(message.into())
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }

    pub fn solver(message: impl Into<String>) -> Self {
        Error::Solver(message.into())
    }

    /// Wraps `self` with a context prefix, keeping the original as source.
    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
