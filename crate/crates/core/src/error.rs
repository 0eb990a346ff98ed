use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("axis ({0}, {1}, {2}) is not unit norm")]
    InvalidAxis(f64, f64, f64),

    #[error("unknown qubit label `{0}`")]
    UnknownQubit(String),

    #[error("duplicate qubit label `{0}`")]
    DuplicateQubit(String),

    #[error("matrix is not unitary (deviation {0:e})")]
    NonUnitary(f64),

    #[error("outcome {outcome} on `{qubit}` has probability {probability:e}")]
    ZeroProbability {
        qubit: String,
        outcome: u8,
        probability: f64,
    },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("state is not normalized (norm² = {0})")]
    Unnormalized(f64),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("group index {group} outside 3..={max}")]
    GroupOutOfRange { group: usize, max: usize },

    #[error("expected {expected} entries, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("state is not of stator form (residual {0:e})")]
    NotStatorForm(f64),

    #[error("probe inputs do not determine the stator coefficients")]
    UnderdeterminedStator,

    #[error("projection annihilated every stator term")]
    AnnihilatedStator,

    #[error("stator has no nonzero terms")]
    ZeroStator,

    #[error("party `{party}` does not own qubit `{qubit}`")]
    LocalityViolation { party: String, qubit: String },

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("value {value} outside {range}")]
    OutOfRange { value: f64, range: &'static str },

    #[error("parse error: {0}")]
    Parse(String),
}
