//! Crate-wide error type.

use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An operation was handed tensors whose dimensions do not fit together.
    #[error("{op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// A documented precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An input that must carry signal energy was all zeros.
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    /// Direct-link gain too small to equalize against.
    #[error("deep fade: |h| = {magnitude:.3e} at or below cutoff {cutoff:.3e}")]
    DeepFade { magnitude: f64, cutoff: f64 },

    /// Malformed serialized bytes (checkpoint or training state).
    #[error("format error at byte {offset}: {detail}")]
    Format { offset: usize, detail: String },

    /// A computation produced NaN or infinity where a finite value is required.
    #[error("numerical failure: {0}")]
    NonFinite(String),
}

impl Error {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    pub fn contract(detail: impl Into<String>) -> Self {
        Error::Contract(detail.into())
    }
}
