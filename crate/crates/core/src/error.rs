use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("arm {arm} out of range for a model with {n_arms} arms")]
    ArmOutOfRange { arm: usize, n_arms: usize },

    #[error("cannot cover {n_arms} arms with {n_agents} agents")]
    Coverage { n_arms: usize, n_agents: usize },

    #[error("invalid arm model: {0}")]
    InvalidModel(String),

    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),

    #[error("protocol violation: arm {0} was broadcast after elimination")]
    EliminatedBroadcast(usize),

    #[error("agent has no active shared arm")]
    EmptySharedActiveSet,

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("failed to write trace: {0}")]
    Trace(String),

    #[error("contract violation: {0}")]
    Contract(String),
}
