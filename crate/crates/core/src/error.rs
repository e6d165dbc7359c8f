use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BqtError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("invalid subsystem index {index} for {count} subsystems")]
    InvalidSubsystem { index: usize, count: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("operator is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("solver did not reach an optimal point: {0}")]
    Solver(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, BqtError>;
