use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("node {node} is outside [0, {max}]")]
    OffGrid { node: usize, max: usize },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("degenerate conditioning: remaining variance {0:e} at node {1}")]
    DegenerateConditioning(f64, usize),

    #[error("invalid market: {0}")]
    InvalidMarket(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("non-positive density {0:e}")]
    NonPositiveDensity(f64),

    #[error("non-positive wealth {value:e} at node {node}")]
    NonPositiveWealth { node: usize, value: f64 },

    #[error("need at least {need} replications, got {got}")]
    TooFewReplications { need: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
