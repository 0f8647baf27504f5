use thiserror::Error;

/// Every failure the engine can report. Variant names double as the
/// machine-readable error codes surfaced by the command-line tool.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {0} has (near) zero Euclidean norm")]
    ZeroVectorRow(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("embedding bag is not L2-normalized")]
    NotNormalized,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid embedding bag: {0}")]
    InvalidBag(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("objective {objective} requires a {expected} kernel")]
    KernelKindMismatch {
        objective: &'static str,
        expected: &'static str,
    },
    #[error("objective {0} requires a nonnegative kernel (Raw mode rejected)")]
    NonnegativeKernelRequired(&'static str),
    #[error("index {index} out of range for ground set of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("index {0} already selected")]
    AlreadySelected(usize),
    #[error("budget {budget} exceeds pool of size {pool}")]
    BudgetExceedsPool { budget: usize, pool: usize },
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("brute force supports at most {max} elements, got {size}")]
    PoolTooLarge { size: usize, max: usize },
    #[error("margin needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("invalid proposal scores: {0}")]
    InvalidScores(String),
    #[error("method {0} needs per-image model scores")]
    MissingScores(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient objects: {0}")]
    InsufficientObjects(String),
    #[error("labeled set is empty")]
    EmptyLabeledSet,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable variant name, e.g. `"BudgetExceedsPool"`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::ZeroVectorRow(_) => "ZeroVectorRow",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::NotNormalized => "NotNormalized",
            Error::EmptyInput(_) => "EmptyInput",
            Error::InvalidBag(_) => "InvalidBag",
            Error::InvalidKernel(_) => "InvalidKernel",
            Error::KernelKindMismatch { .. } => "KernelKindMismatch",
            Error::NonnegativeKernelRequired(_) => "NonnegativeKernelRequired",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::AlreadySelected(_) => "AlreadySelected",
            Error::BudgetExceedsPool { .. } => "BudgetExceedsPool",
            Error::ZeroBudget => "ZeroBudget",
            Error::PoolTooLarge { .. } => "PoolTooLarge",
            Error::TooFewClasses(_) => "TooFewClasses",
            Error::InvalidScores(_) => "InvalidScores",
            Error::MissingScores(_) => "MissingScores",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InsufficientObjects(_) => "InsufficientObjects",
            Error::EmptyLabeledSet => "EmptyLabeledSet",
            Error::EmptyTestSet => "EmptyTestSet",
            Error::Format(_) => "Format",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
