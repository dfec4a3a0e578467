use alloc::string::String;

/// Contract violations and runtime diagnostics raised by the estimators.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("state index {state} out of range for {states} states")]
    InvalidState { state: usize, states: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("push loop exceeded its iteration cap of {cap}")]
    IterationCap { cap: u64 },
    #[error("resampling gave up after {attempts} attempts")]
    ResampleCap { attempts: u64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
