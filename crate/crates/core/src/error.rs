use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("alphabet size must be between 2 and 36, got {0}")]
    AlphabetSize(usize),

    #[error("letter {letter} out of range for alphabet of size {k}")]
    LetterOutOfRange { letter: usize, k: usize },

    #[error("alphabet mismatch: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },

    #[error("pattern size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("not a permutation: {0:?}")]
    InvalidPerm(Vec<usize>),

    #[error("invalid machine: {0}")]
    InvalidMachine(String),

    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("window of size {size} at depth {depth} exceeds pattern of size {pattern}")]
    WindowOutOfRange { depth: usize, size: usize, pattern: usize },

    #[error("word does not stabilize level {0}")]
    NotStabilizing(usize),

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("resource limit exceeded: {what} (limit {limit})")]
    Resource { what: &'static str, limit: usize },

    #[error("possibly non-contracting: nucleus iteration did not stabilize ({0})")]
    PossiblyNonContracting(String),

    #[error("computation cancelled")]
    Cancelled,
}

impl Error {
    /// Resource-type failures are not answers: the question stays undecided.
    pub fn is_resource(&self) -> bool {
        matches!(
            self,
            Error::Resource { .. } | Error::PossiblyNonContracting(_) | Error::Cancelled
        )
    }
}
