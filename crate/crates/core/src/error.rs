use thiserror::Error;

use crate::observation::Family;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("observation {y} is outside the support of the {family} family")]
    OutOfSupport { family: Family, y: f64 },

    #[error("test truncated after {cap} observations without a decision")]
    Truncated { cap: u64 },

    #[error("observation stream exhausted after {consumed} observations")]
    StreamExhausted { consumed: u64 },

    #[error("{k} components is too many for exhaustive search (limit {max}); use an index rule instead")]
    TooManyComponents { k: usize, max: usize },

    #[error("invalid ordering: {0}")]
    InvalidOrdering(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
