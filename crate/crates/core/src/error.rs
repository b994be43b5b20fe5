use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid law: {0}")]
    InvalidLaw(String),
    #[error("degenerate spectral measure: direction span has rank {rank} < d = {dim}")]
    Degenerate { rank: usize, dim: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("quadrature did not converge: estimated error {est:e} exceeds tolerance {tol:e}")]
    QuadratureFailure { est: f64, tol: f64 },
    #[error("numerical budget exceeded: {0}")]
    Budget(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
