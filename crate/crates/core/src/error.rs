use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("weight integral {name} does not converge")]
    DivergentIntegral { name: &'static str },

    #[error("time {t} outside the grid range [0, {max}]")]
    TimeOutOfRange { t: f64, max: f64 },

    #[error("non-positive value {value} at maturity {maturity}")]
    NonPositive { maturity: f64, value: f64 },

    #[error("maturity {0} is not a grid node")]
    OffGrid(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{flagged} of {total} paths breached positivity")]
    PositivityBreach { flagged: usize, total: usize },

    #[error("hedge matrix is singular (condition number {condition:e})")]
    Singular { condition: f64 },

    #[error("estimated cost {estimate:e} exceeds the configured cap {cap:e}")]
    BudgetExceeded { estimate: f64, cap: f64 },

    #[error("i/o failure: {0}")]
    Io(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
