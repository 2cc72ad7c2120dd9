use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("genotype does not belong to the topology")]
    TopologyMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("sample has zero variance")]
    ZeroVariance,
    #[error("contingency table has an empty margin: {0}")]
    ZeroMargin(String),
    #[error("singular fit: design matrix is rank deficient")]
    SingularFit,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient viable material after {attempts} draws ({histogram})")]
    InsufficientViable { attempts: usize, histogram: String },
}

pub type Result<T> = core::result::Result<T, Error>;
