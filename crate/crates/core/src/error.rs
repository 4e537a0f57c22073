use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid channel basis: {0}")]
    InvalidBasis(String),

    #[error("invalid step triple: {0}")]
    InvalidSteps(String),

    #[error("eigensolver did not converge for matrix {0}")]
    EigenFailure(String),

    #[error("singular step matrix at node {node} (rho = {rho}); check step length and grid")]
    SingularStep { node: usize, rho: f64 },

    #[error("non-finite solution at outer node {node} (rho = {rho})")]
    NonFinite { node: usize, rho: f64 },

    #[error("ill-conditioned matching system (condition {condition:.3e}); R0 too small or degenerate columns")]
    IllConditioned { condition: f64 },

    #[error("metadata mismatch: {0}")]
    Metadata(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
