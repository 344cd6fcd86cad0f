use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("invalid tolerance {0}; must be positive and finite")]
    InvalidTolerance(f64),
    #[error("program is unbounded in the objective direction")]
    Unbounded,
    #[error("numerical failure: {0}")]
    Numerical(String),
}
