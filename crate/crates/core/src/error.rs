use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum BsvieError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure at node {node}: condition number {condition:.3e} ({detail})")]
    NumericalFailure {
        node: usize,
        condition: f64,
        detail: String,
    },

    #[error("solver divergence: {0}")]
    SolverDivergence(String),

    #[error("no convergence after {} iterations (last relative delta {last:.3e})", history.len())]
    NonConvergence { history: Vec<f64>, last: f64 },

    #[error("certificate rejected: margin {margin:.6e}")]
    CertificateRejected { margin: f64 },

    #[error("certification failure: {0}")]
    CertificationFailure(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BsvieError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(BsvieError::InvalidArgument(msg.into()))
}
