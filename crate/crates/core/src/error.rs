//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape disagreement between tensors; names both shapes.
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// Non-finite values or degenerate numeric input (zero norms, NaN).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A caller violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Token id outside the configured vocabulary.
    #[error("token id {id} out of vocabulary (V = {vocab})")]
    Vocab { id: u32, vocab: usize },

    /// Malformed keyword corpus (duplicates, empty entries).
    #[error("corpus error: {0}")]
    Corpus(String),

    /// Invalid configuration value or unknown configuration key.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed on-disk artifact (checkpoint, index, cache, world file).
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    /// Training hit a non-finite loss; carries the offending batch ids.
    #[error("non-finite loss at step {step}; batch pair ids {batch_ids:?}")]
    NanAbort { step: usize, batch_ids: Vec<usize> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 usage, 2 data, 3 numeric abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NanAbort { .. } | Error::Numeric(_) => 3,
            Error::Config(_) => 1,
            _ => 2,
        }
    }
}
