use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Raised before any privacy budget is spent when the private count
    /// threshold would be vacuous for the requested configuration.
    #[error("insufficient users: n = {n} but the configuration needs at least {required:.2} \
             (threshold tau = {tau:.3} <= 1)")]
    InsufficientUsers { n: usize, required: f64, tau: f64 },

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    /// Covariance estimation refuses runs that aborted at round zero.
    #[error("degenerate estimation run: {0}")]
    DegenerateRun(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid restriction matrix: {0}")]
    InvalidRestriction(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Io(_) => 2,
            Error::InsufficientUsers { .. } => 3,
            Error::DegenerateCovariance(_) | Error::DegenerateRun(_) => 4,
            _ => 1,
        }
    }
}
