use thiserror::Error;

/// Errors raised by sampling, estimation and the bound computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A distribution, model or bound received parameters outside its domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A design or sample does not fit the requested operation.
    #[error("design error: {0}")]
    Design(String),
    /// The output (or a linearized statistic) has zero empirical variance.
    #[error("degenerate output: {0}")]
    Degenerate(String),
    /// A function was evaluated outside its domain (h(x) for x <= -1, a negative radicand, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// A bound is discontinuous at the requested point.
    #[error("boundary error: {0}")]
    Boundary(String),
    /// A configuration file could not be read or validated.
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by the data rather than by the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Degenerate(_) | Error::Domain(_) | Error::Boundary(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
