use thiserror::Error;

/// Errors produced by model construction, integration and analytics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate equilibrium: K(eta - rho) = {lhs} must exceed nu = {nu}")]
    DegenerateEquilibrium { lhs: f64, nu: f64 },

    #[error("invalid deme graph size {0}")]
    InvalidSize(usize),

    #[error("invalid deme graph: {0}")]
    InvalidGraph(String),

    #[error("non-finite state at step {step} (component {component}){}", replica.map(|r| format!(" in replica {r}")).unwrap_or_default())]
    NonFiniteState {
        step: u64,
        component: usize,
        replica: Option<usize>,
    },

    #[error("theta = {theta} outside the open interval ({lo}, {hi})")]
    ThetaOutOfRange { theta: f64, lo: f64, hi: f64 },

    #[error("quadrature failed: estimated error {estimate:e} exceeds tolerance {tolerance:e}")]
    QuadratureFailure { estimate: f64, tolerance: f64 },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty sample")]
    EmptySample,

    #[error("insufficient replicas: {0}")]
    InsufficientReplicas(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteState { .. } | Error::QuadratureFailure { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
