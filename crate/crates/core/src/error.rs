use thiserror::Error;

#[derive(Debug, Error)]
pub enum ThermionError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("singular system (sigma_min = {sigma_min:.3e})")]
    SingularSystem { sigma_min: f64 },
    #[error("solver residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    Residual { residual: f64, tol: f64 },
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("insufficient range: {0}")]
    InsufficientRange(String),
    #[error("quadrature budget: {0}")]
    QuadratureBudget(String),
    #[error("rejected coupling: {0}")]
    RejectedCoupling(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, ThermionError>;

pub(crate) fn invalid(msg: impl Into<String>) -> ThermionError {
    ThermionError::InvalidParameter(msg.into())
}
