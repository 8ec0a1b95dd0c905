//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated a precondition (bad parameter range, mixed groups,
    /// malformed input).
    #[error("usage error: {0}")]
    Usage(String),

    /// Input is outside the mathematical domain of the operation (e.g. an
    /// element that is not a member of the group spanned by a basis).
    #[error("domain error: {0}")]
    Domain(String),

    /// An element was not found within the enumerated radius cap. Distinct
    /// from "not in the group": enlarging the cap may resolve it.
    #[error("unreached within radius cap {cap}")]
    Unreached { cap: u32 },

    /// A resource budget (support size, memory, enumeration count) was
    /// exceeded. Partial results are flagged unusable.
    #[error("budget exceeded: {what} ({used} > {limit})")]
    Budget {
        what: &'static str,
        used: u64,
        limit: u64,
    },

    /// Certified error intervals are too wide for the requested operation.
    #[error("certified intervals too wide: {0}")]
    IntervalsTooWide(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
