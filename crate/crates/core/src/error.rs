use thiserror::Error;

use crate::lp::LpError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NumericalFailure { iterations: usize, residual: f64 },

    #[error("hyperplane target {index} is infeasible: level {level} outside [{min}, {max}]")]
    InfeasibleTarget { index: usize, level: f64, min: f64, max: f64 },

    #[error("posterior has {got} samples per cell, at least {required} are needed")]
    InsufficientSamples { required: usize, got: usize },

    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
