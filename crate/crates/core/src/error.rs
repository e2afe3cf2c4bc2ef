use thiserror::Error;

/// Errors produced by the numerical kernels, solvers and verifiers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("gamma function pole at z = {0}")]
    GammaPole(f64),
    #[error("series did not converge within {terms} terms ({what})")]
    NonConvergence { what: &'static str, terms: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("argument {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },
    #[error("grid too small: {0}")]
    InsufficientGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("operator not available for singular data: {0}")]
    SingularData(String),
    #[error("nonlinear solver failed at step {step}: {reason}")]
    Solver { step: usize, reason: String },
    #[error("inadmissible conserved vector {id}: {reason}")]
    Inadmissible { id: String, reason: String },
    #[error("zero substitution: all constants vanish")]
    ZeroSubstitution,
    #[error("range error: {0}")]
    Range(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
