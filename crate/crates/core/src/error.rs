use thiserror::Error;

/// Errors raised by the library. Mathematical check failures are not errors;
/// they are reported through the diagnostic and report types.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum UmfError {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("division by zero in GF(q)")]
    DivisionByZero,

    #[error("value {value} out of range [0, {bound})")]
    Range { value: u64, bound: u64 },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unsupported parameter: {0}")]
    Unsupported(String),

    #[error("grid resolution too coarse: |lambda| = q^{norm_exp} exceeds q^{m}")]
    ResolutionTooCoarse { norm_exp: i32, m: i32 },

    #[error("window overflow: {0}")]
    WindowOverflow(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("invalid setup: {0}")]
    InvalidSetup(String),

    #[error("dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("math check failed: {0}")]
    CheckFailed(String),
}

pub type Result<T> = std::result::Result<T, UmfError>;
