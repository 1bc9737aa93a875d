use thiserror::Error;

/// Errors produced by the simulation and operator machinery.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("factor index {index} out of truncation {truncation}")]
    FactorOutOfRange { index: usize, truncation: usize },

    #[error("time argument {value} outside [0, {horizon}]")]
    TimeOutOfRange { value: f64, horizon: f64 },

    #[error("sign-switching volatility requires a path state with the running integral")]
    MissingPathState,

    #[error("non-finite value at step {step}, maturity index {maturity}")]
    NonFinite { step: usize, maturity: usize },

    #[error("curve length {got} does not match grid length {expected}")]
    LengthMismatch { got: usize, expected: usize },

    #[error("spectral decomposition failed: {0}")]
    SpectrumFailed(String),

    #[error("fewer than {needed} usable spectral indices at truncation (found {found}); increase the factor count")]
    InsufficientTruncation { needed: usize, found: usize },

    #[error("operator not injective at truncation: {0}")]
    NotInjective(String),

    #[error("base volatility violates the H-norm bound: {0}")]
    BaseBoundViolated(String),

    #[error("config error:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
