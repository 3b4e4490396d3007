//! Error and result types shared across the crate.

use thiserror::Error;

/// Convenience alias used by every fallible operation in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All errors produced by the toolkit.
///
/// Variants are grouped by where the fault lies: `Conll`, `Data` and
/// `ModelFormat` indicate bad input, `IllegalTransition` and `Internal`
/// indicate a violated invariant, and `Io` wraps filesystem failures.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed CoNLL input, with the 1-based line number of the offending
    /// line in the source stream.
    #[error("line {line}: {message}")]
    Conll { line: usize, message: String },

    /// Semantically invalid input or parameters: empty training data,
    /// mismatched sentence counts, out-of-range options and the like.
    #[error("{0}")]
    Data(String),

    /// A transition was applied in a configuration where its precondition
    /// does not hold.
    #[error("illegal transition: {0}")]
    IllegalTransition(String),

    /// A serialized model could not be decoded: unknown version, truncated
    /// stream or malformed line.
    #[error("model format: {0}")]
    ModelFormat(String),

    /// An internal invariant was violated; indicates a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    /// Filesystem error while reading or writing an artifact.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn conll(line: usize, message: impl Into<String>) -> Self {
        Error::Conll {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn data(message: impl Into<String>) -> Self {
        Error::Data(message.into())
    }

    pub(crate) fn model(message: impl Into<String>) -> Self {
        Error::ModelFormat(message.into())
    }

    pub(crate) fn internal(message: impl Into<String>) -> Self {
        Error::Internal(message.into())
    }
}
