use thiserror::Error;

/// Errors raised by the estimators and constant calculators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("degenerate kernel: moment matrix of order {order} is singular")]
    DegenerateKernel { order: usize },

    #[error("infinite worst-case bias: {0}")]
    InfiniteBias(String),

    #[error("insufficient data: {reason} (effective sample size {effective_n})")]
    InsufficientData { reason: String, effective_n: usize },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn insufficient(reason: impl Into<String>, effective_n: usize) -> Self {
        Error::InsufficientData { reason: reason.into(), effective_n }
    }

    /// Short machine-readable tag, used by the CLI's structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::NoSolution(_) => "no_solution",
            Error::DegenerateKernel { .. } => "degenerate_kernel",
            Error::InfiniteBias(_) => "infinite_bias",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::DegenerateDesign(_) => "degenerate_design",
            Error::Solver { .. } => "solver",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
