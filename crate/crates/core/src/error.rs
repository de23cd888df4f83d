use thiserror::Error;

/// Errors produced by pencil, manifold, objective and solver operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NspError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("index {index} out of range for size {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("real pencil has a non-zero imaginary part at ({row}, {col})")]
    NonRealEntry { row: usize, col: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("objective is not differentiable: diagonal weights tie at positions {0:?}")]
    NonDifferentiable(Vec<usize>),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("retraction failed: QR factor is rank deficient")]
    RetractionFailed,

    #[error("QZ iteration did not converge after {0} sweeps")]
    QzNoConvergence(usize),

    #[error("2x2 pencil is singular and cannot be reordered")]
    SingularBlock,

    #[error("no zero diagonal pair found above tolerance {0:e}")]
    NoZeroDiagonal(f64),

    #[error("resampling budget of {0} attempts exhausted")]
    ResamplingExhausted(usize),

    #[error("all {0} runs failed")]
    AllRunsFailed(usize),

    #[error("malformed pencil data: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, NspError>;
