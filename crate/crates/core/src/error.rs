use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid box [{0}, {1}, {2}, {3}]: coordinates must be finite with max >= min")]
    InvalidBox(f64, f64, f64, f64),
    #[error("degenerate box: {0} must have positive area")]
    DegenerateBox(&'static str),
    #[error("invalid {field}: {reason}")]
    InvalidValue { field: String, reason: String },
    #[error("{0}")]
    Invariant(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidValue { field: field.into(), reason: reason.into() }
    }
}
