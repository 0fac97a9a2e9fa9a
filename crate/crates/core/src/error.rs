use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("linear system is numerically singular (reciprocal condition estimate {rcond:e})")]
    SingularSystem { rcond: f64 },

    #[error("greedy pruning removed {removed} of {total} observed entries")]
    MaskExhausted { removed: usize, total: usize },

    #[error("no parameter schedule for ambient dimension {0}")]
    UnknownModel(usize),

    #[error("could not assign points to subspaces after {attempts} attempts")]
    InfeasibleAssignment { attempts: usize },

    #[error("{isolated} isolated points exceed the cluster budget of {k}")]
    DisconnectedDegenerate { isolated: usize, k: usize },

    #[error("label vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
