use alloc::string::String;

/// Errors raised by the kernel, Gram, GP and oracle routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NngpError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("kernel overflow at layer {layer} ({regime})")]
    Overflow { layer: usize, regime: String },
    #[error("correlation {0} outside [-1, 1] beyond rounding tolerance")]
    CorrelationOutOfRange(f64),
    #[error("no critical parameters exist for additive noise")]
    NoCriticalPair,
    #[error(
        "cholesky factorisation failed at jitter {jitter:e}: pivot {pivot} of {size} was {value:e}"
    )]
    Factorization {
        jitter: f64,
        pivot: usize,
        size: usize,
        value: f64,
    },
    #[error("predictive variance {0:e} is negative beyond rounding tolerance")]
    NegativeVariance(f64),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("2x2 covariance is not positive semidefinite")]
    NotPsd,
    #[error("need at least {needed} cells in each partition, found {found}")]
    InsufficientCells { needed: usize, found: usize },
    #[error("correlation undefined: zero variance")]
    UndefinedCorrelation,
}

pub type Result<T> = core::result::Result<T, NngpError>;
