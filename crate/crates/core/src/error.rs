use thiserror::Error;

/// Everything that can go wrong in the library. Classified trajectory
/// failures are *not* errors; they come back as `Outcome::Failure`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular Jacobian: {0}")]
    SingularJacobian(String),
    #[error("saddle classification failed: {0}")]
    Classification(String),
    #[error("infeasible flux sample: radicand {0:.3e} < 0")]
    InfeasibleSample(f64),
    #[error("degenerate fit window: {usable} usable points, need at least {needed}")]
    DegenerateWindow { usable: usize, needed: usize },
    #[error("no double escape at the symmetric launch (epsilon = {0:.3e})")]
    NoSymmetricEscape(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
