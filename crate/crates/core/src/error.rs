use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("operator is degenerate: {0}")]
    DegenerateOperator(String),
    #[error("operator has a diffusion part; the sigma-moment requires A = 0")]
    HasDiffusionPart,
    #[error("adaptive quadrature did not converge: {0}")]
    NonConvergedQuadrature(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("kernel mass defect: {0}")]
    KernelMassDefect(String),
    #[error("non-finite field: {0}")]
    NonFiniteField(String),
    #[error("insufficient fit window: {0}")]
    InsufficientWindow(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("Picard iteration is not contracting: {0}")]
    NoContraction(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("inadmissible configuration: {0}")]
    Inadmissible(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergedQuadrature(_)
                | Error::GridTooCoarse(_)
                | Error::KernelMassDefect(_)
                | Error::NonFiniteField(_)
                | Error::InsufficientWindow(_)
                | Error::NoContraction(_)
                | Error::NoConvergence(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
