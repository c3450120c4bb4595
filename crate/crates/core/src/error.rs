use thiserror::Error;

use crate::model::Mechanism;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("type of user {index} is {value}; types must lie in (0, 1]")]
    InvalidType { index: usize, value: f64 },
    #[error("types must be sorted non-increasing (user {index} has a larger type than user {prev})", prev = .index - 1)]
    UnsortedTypes { index: usize },
    #[error("expected {expected} types, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("parameter `{name}` = {value} is out of range: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("mechanism {0} allocates by rank and needs `K`")]
    MissingTopK(Mechanism),
    #[error("invalid type distribution: {0}")]
    InvalidDistribution(String),
    #[error("{found} is not supported here (expected {expected})")]
    WrongMechanism {
        expected: &'static str,
        found: Mechanism,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("user {user} has no best response: all other users contribute nothing")]
    NoBestResponse { user: usize },
    #[error("no certified equilibrium found: {0}")]
    Exhausted(String),
    #[error("{what} needs {requested} evaluations, above the cap of {cap}")]
    BudgetExceeded {
        what: &'static str,
        requested: u128,
        cap: u128,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
