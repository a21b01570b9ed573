use thiserror::Error;

/// Unified error type for the crate.
///
/// Variants split into two families for process exit codes: validation
/// problems (bad inputs, bad configs, degenerate data) map to exit code 2,
/// I/O, serialization, and malformed-file failures map to 3.
#[derive(Debug, Error)]
pub enum Error {
    /// A window or series is constant where variation is required.
    #[error("signal has (near-)zero variance")]
    ZeroVariance,

    /// A length precondition was violated.
    #[error("invalid length: {0}")]
    InvalidLength(String),

    /// Input is long enough to construct but too short for the operation.
    #[error("input too short: {0}")]
    TooShort(String),

    /// An on-disk artifact does not match the supported NPY subset.
    #[error("unsupported or malformed file: {0}")]
    Format(String),

    /// A configuration violates its invariants.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Tensor shapes disagree with the operation's contract.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Numerically degenerate input (division guards, near-zero channels).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Two series share no common frames.
    #[error("series have no overlapping frames")]
    EmptyOverlap,

    /// An aggregate operation received zero elements.
    #[error("empty input")]
    EmptyInput,

    /// A point cloud has no principal direction (rank-zero covariance).
    #[error("degenerate point cloud: no principal direction")]
    DegenerateCloud,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for validation errors, 3 for
    /// runtime (I/O, serialization) errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Json(_) | Error::Format(_) => 3,
            _ => 2,
        }
    }
}
