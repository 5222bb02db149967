use thiserror::Error;

/// Errors raised by the simulation and analytics routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetdiffError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("third moment does not converge within truncation degree {max_degree}")]
    ThirdMomentDivergent { max_degree: usize },

    #[error("odd degree total unavoidable: {0}")]
    OddDegreeSum(String),

    #[error("no simple pairing found after {attempts} attempts")]
    RejectionCapExceeded { attempts: usize },

    #[error("singular state at t = {t}: {reason}")]
    Singular { t: f64, reason: String },

    #[error("order {order} is not supported (allowed: {allowed})")]
    UnsupportedOrder { order: usize, allowed: &'static str },

    #[error("value {value} outside admissible range {range}")]
    OutOfRange { value: f64, range: String },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("Cholesky factorisation failed after jitter at t = {t}")]
    CholeskyFailed { t: f64 },

    #[error("degenerate quantity: {0}")]
    Degenerate(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for NetdiffError {
    fn from(e: std::io::Error) -> Self {
        NetdiffError::Io(e.to_string())
    }
}

impl NetdiffError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        NetdiffError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, NetdiffError>;
