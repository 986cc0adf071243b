use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("atom count {atoms} over domain size {n} exceeds the cap of {cap}")]
    CapExceeded { atoms: usize, n: usize, cap: u32 },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("duplicate index {0} in restriction tuple")]
    DuplicateIndex(usize),

    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error("stratification error at line {line}, column {col}: {msg}")]
    Stratification { line: usize, col: usize, msg: String },

    #[error("arity error: {0}")]
    Arity(String),

    #[error("missing parameter: {0}")]
    MissingParameter(String),

    #[error("parameter {name} = {value} outside its admissible range")]
    InvalidParameter { name: String, value: f64 },

    #[error("evidence has probability zero")]
    ZeroEvidence,

    #[error("objective is nowhere finite, no maximum exists")]
    NoMaximum,

    #[error("model is not in the projective fragment: {0}")]
    NotInFragment(String),

    #[error("log-likelihood is not separable: {0}")]
    Separability(String),

    #[error("model has unobservable relations: {0}")]
    NotFullyObservable(String),

    #[error("world has probability zero under every parameter value: {0}")]
    ZeroProbabilityWorld(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid world: {0}")]
    InvalidWorld(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
