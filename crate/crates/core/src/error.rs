use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum SandpileError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("height {0} is negative or not finite")]
    InvalidHeight(f64),

    #[error("site {site} out of range for {len} sites")]
    SiteOutOfRange { site: usize, len: usize },

    #[error("toppling cap of {cap} exceeded during stabilization")]
    ToppleCapExceeded { cap: u64 },

    #[error("histogram binning mismatch: {0}")]
    BinningMismatch(String),

    #[error("lattice geometry mismatch: {0}")]
    GeometryMismatch(String),

    /// A property guaranteed by the model's dynamics did not hold. Always a bug.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SandpileError {
    /// Process exit code for this error: 2 for invariant violations, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            SandpileError::InvariantViolation(_) | SandpileError::ToppleCapExceeded { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, SandpileError>;
