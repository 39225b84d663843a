use pacer_conic::{ProgramError, SolveStatus};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    #[error("covariance is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("covariance is not symmetric (largest asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid block layout: {0}")]
    Layout(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("mean dynamics do not converge (spectral radius {0:.6})")]
    NonConvergent(f64),
    #[error("nonconvex configuration: {0}")]
    Nonconvex(String),
    #[error("malformed program: {0}")]
    Program(#[from] ProgramError),
    #[error("solver returned {0:?}")]
    Solver(SolveStatus),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
