use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the domain of an operation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A grid or quadrature cannot resolve the requested computation.
    #[error("resolution: {0}")]
    Resolution(String),

    /// Time quadrature self-estimate above tolerance.
    #[error("time resolution: {0}")]
    TimeResolution(String),

    /// Parameters outside the window where the estimate is asserted.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// A weight evaluated to a non-finite value at a sampled node.
    #[error("singular sampling: {0}")]
    SingularSampling(String),

    #[error("division guard: {0}")]
    DivisionGuard(String),

    #[error("not contractive: {0}")]
    NotContractive(String),

    #[error("budget exhausted: {0}")]
    Budget(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn resolution(msg: impl Into<String>) -> Self {
        Error::Resolution(msg.into())
    }

    pub(crate) fn hypothesis(msg: impl Into<String>) -> Self {
        Error::Hypothesis(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {x}")))
    }
}
