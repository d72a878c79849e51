use thiserror::Error;

/// Errors produced by samplers, estimators and the exact enumeration oracle.
#[derive(Debug, Error)]
pub enum Error {
    /// The chain occupies (or was initialized at) a state with zero target density.
    #[error("invalid chain state: {0}")]
    InvalidState(String),

    /// A configuration value is inconsistent or out of range.
    #[error("configuration error: {0}")]
    Config(String),

    /// A discrete instance exceeds the enumeration guard.
    #[error("state space has {states} states, exceeding the limit of {limit}")]
    SizeLimit { states: usize, limit: usize },

    /// An internal cross-check disagreed (signals a kernel or oracle bug).
    #[error("consistency check failed: {0}")]
    Consistency(String),

    /// A regeneration factor exceeded 1, meaning the supplied minorization
    /// functions do not actually satisfy the sandwich inequalities.
    #[error("minorization violated: regeneration factor {factor} exceeds 1 (component {component})")]
    MinorizationViolation { factor: f64, component: usize },

    /// No complete tour was observed.
    #[error("insufficient regenerations: no complete tour observed")]
    InsufficientRegenerations,

    /// A rejection sampler made no progress.
    #[error("rejection sampler exceeded {0} consecutive rejections")]
    PathologicalTruncation(u64),

    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error("quadrature error: {0}")]
    Quadrature(String),

    /// A trace has zero variance, so its autocorrelation is undefined.
    #[error("degenerate trace: {0}")]
    DegenerateTrace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line interface.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) => 2,
            Error::InsufficientRegenerations => 3,
            _ => 1,
        }
    }
}
