use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("location {0} is outside [0, 1]")]
    OutOfRange(f64),

    #[error("profile must contain at least one agent")]
    Empty,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid objective: {0}")]
    InvalidObjective(String),

    #[error("invalid mechanism: {0}")]
    InvalidMechanism(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("objective {0} is not supported by this routine")]
    SpecNotSupported(String),

    #[error("quadrature did not reach tolerance {tolerance:e} (estimated error {estimate:e})")]
    QuadratureFailure { tolerance: f64, estimate: f64 },

    #[error("evaluation budget of {cap} exceeded")]
    BudgetExceeded { cap: u64 },

    #[error("no distribution satisfies the moment constraint")]
    Infeasible,
}

impl Error {
    /// True for failures of the numeric machinery, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::QuadratureFailure { .. } | Error::Infeasible)
    }
}
