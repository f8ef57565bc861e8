//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed input: bad ids, shapes, or unparsable numbers.
    #[error("input error: {0}")]
    Input(String),
    /// Unparsable text.
    #[error("parse error: {0}")]
    Parse(String),
    /// Operands built over different quivers, truncations or contexts.
    #[error("mismatch: {0}")]
    Mismatch(String),
    /// A precondition of the mathematics fails (singular block, loop at the mutation vertex, ...).
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// A configured enumeration budget would be exceeded.
    #[error("budget exceeded: {0}")]
    Budget(String),
}

impl Error {
    /// True for errors that describe mathematical infeasibility rather than bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_) | Error::Budget(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
