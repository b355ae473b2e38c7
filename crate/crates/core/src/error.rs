use thiserror::Error;

/// Crate-wide error type. Exit codes group the variants into the four
/// categories the CLI documents: configuration, data, numeric, infeasible.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("search space too large to enumerate: {size} entries exceeds cap {cap}")]
    TooLargeToEnumerate { size: u128, cap: u64 },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("degenerate cost range: lo == hi == {0}")]
    DegenerateRange(f64),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(
        "no feasible architecture for budget {budget}; best near-miss cost {near_miss_cost} ({near_miss_tokens:?})"
    )]
    InfeasibleBudget {
        budget: f64,
        near_miss_cost: f64,
        near_miss_tokens: Vec<usize>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable process exit code for this error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::TooLargeToEnumerate { .. } => 2,
            Error::InvalidArchitecture(_)
            | Error::EmptyDataset(_)
            | Error::DegenerateRange(_)
            | Error::DegenerateData(_)
            | Error::Parse { .. } => 3,
            Error::Numeric(_) => 4,
            Error::InfeasibleBudget { .. } => 5,
            Error::Io(_) => 6,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
