use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {0} lies outside the open unit disc")]
    OutsideDisc(String),
    #[error("point with modulus {modulus} is beyond the partition's last ring r_J = {r_last}")]
    OutOfRange { modulus: f64, r_last: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("integral diverged: {0}")]
    Diverged(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("sequence needs at least two points")]
    TooFewPoints,
    #[error("sequence is not uniformly discrete (separation {0})")]
    NotSeparated(f64),
    #[error("density schedule is empty")]
    EmptySchedule,
    #[error("lattice too dense: separation {0} below 1e-3")]
    TooDense(f64),
    #[error("no convergence after {0} steps")]
    NoConvergence(usize),
    #[error("summability certificate failed: tail ratio {0}")]
    SummabilityFailure(f64),
    #[error("no contraction: residual ratio stayed at or above 1 ({0})")]
    NoContraction(f64),
    #[error("constraint matrix is rank deficient ({0})")]
    RankDeficient(String),
    #[error("Schur window is empty for alpha = {alpha}, q = {q}")]
    InfeasibleWindow { alpha: f64, q: f64 },
    #[error("parameter violation: {0}")]
    ParameterViolation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
