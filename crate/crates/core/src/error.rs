use thiserror::Error;

/// Failures reported by the numerical routines and the run configuration layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no saddle equilibrium at these parameters")]
    MissingSaddle,
    #[error("degenerate eigen-decomposition: {0}")]
    DegenerateEigen(String),
    #[error("root bracketing failed: {0}")]
    Bracket(String),
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("tipping verdict undetermined at r = {r}")]
    Undetermined { r: f64 },
    #[error("verdicts at both ends of the bracket agree ({0})")]
    SameVerdict(String),
    #[error("gradient flow not converged after {iterations} iterations (action {action})")]
    NotConverged { iterations: usize, action: f64 },
    #[error("path junction mismatch: distance {distance} exceeds {tol}")]
    Junction { distance: f64, tol: f64 },
    #[error("separatrix: {0}")]
    Separatrix(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParams(_) | Error::Config(_) => 2,
            Error::NotConverged { .. } | Error::Undetermined { .. } => 4,
            _ => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "invalid-params",
            Error::Config(_) => "config",
            Error::MissingSaddle => "missing-saddle",
            Error::DegenerateEigen(_) => "degenerate-eigen",
            Error::Bracket(_) => "bracket",
            Error::NonFinite { .. } => "non-finite",
            Error::Undetermined { .. } => "undetermined",
            Error::SameVerdict(_) => "same-verdict",
            Error::NotConverged { .. } => "not-converged",
            Error::Junction { .. } => "junction",
            Error::Separatrix(_) => "separatrix",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
