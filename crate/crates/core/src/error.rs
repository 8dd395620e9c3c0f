use alloc::string::String;

/// Errors raised by the placement engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("allocation covers {got} VMs but the datacenter has {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("server index {0} is out of range")]
    ServerOutOfRange(usize),

    #[error("invalid datacenter: {0}")]
    InvalidDatacenter(String),

    #[error("allocation violates a capacity constraint on server {0}")]
    CapacityViolated(usize),

    #[error("infeasible instance: {0}")]
    Infeasible(String),

    #[error("cannot truncate a population of {size} members to {requested}")]
    TruncateTooLarge { size: usize, requested: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid trace: {0}")]
    InvalidTrace(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
