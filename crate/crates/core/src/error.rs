use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tensor is not positive definite (smallest eigenvalue {0:e})")]
    NonSpd(f64),
    #[error("tensor is singular")]
    Singular,
    #[error("determinant {0} too far from one for the unit-determinant manifold")]
    DeterminantDrift(f64),
    #[error("energy is not finite at the initial state")]
    NonFiniteEnergy,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("integration failure: {0}")]
    IntegrationFailure(String),
    #[error("flow did not reach the target set before the maximum time")]
    MaxTimeExceeded,
    #[error("element {element} inverted at gauss point {gauss}")]
    ElementInversion { element: usize, gauss: usize },
    #[error("solver diverged: {0}")]
    SolverDivergence(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
