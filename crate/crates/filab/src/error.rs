//! Error type shared across the crate.
//!
//! Four failure families cover everything the library can reject: malformed
//! caller input, mathematical domain violations, work that would exceed a
//! resource bound, and numerical breakdown inside an optimizer.

use thiserror::Error;

/// Crate-wide error enum. Variants carry human-readable context strings;
/// callers that need to branch on failure family match on the variant.
#[derive(Debug, Error)]
pub enum FilabError {
    /// Caller-supplied data is structurally invalid: mismatched lengths,
    /// negative probabilities, rows that do not sum to one, bad flag values.
    #[error("invalid input: {0}")]
    Input(String),

    /// A value lies outside the mathematical domain of the requested
    /// operation, e.g. a conjugate argument outside dom f*.
    #[error("domain violation: {0}")]
    Domain(String),

    /// The request is well-formed but too large to honor, e.g. trajectory
    /// enumeration past the node cap.
    #[error("resource limit: {0}")]
    Resource(String),

    /// An iterative routine produced NaN or otherwise lost numerical footing.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Shorthand result alias used across the crate.
pub type Result<T> = std::result::Result<T, FilabError>;
