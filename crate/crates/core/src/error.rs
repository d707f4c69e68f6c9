use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("empty input")]
    EmptyInput,
    #[error("qubit count mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{n} qubits exceeds the limit of {max} for this operation")]
    TooLarge { n: usize, max: usize },
    #[error("basis index {index} out of range for {n} qubits")]
    IndexOutOfRange { index: u64, n: usize },
    #[error("state norm deviates from 1 by {0:e}")]
    NormDeviation(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("expectation value has imaginary part {0:e}")]
    ComplexExpectation(f64),
    #[error("reduction set carries all probability weight, nothing left to amplify")]
    NothingToAmplify,
    #[error("probability recursion denominator is not positive ({0:e})")]
    DegenerateRecursion(f64),
    #[error("ledger needs at least {needed} entries, has {found}")]
    LedgerTooShort { needed: usize, found: usize },
    #[error("step adaptation exhausted {probes} probes without a new bitstring (last steps {last_steps})")]
    AdaptationExhausted { probes: usize, last_steps: u64 },
    #[error("shot budget of {0} exceeded")]
    ShotBudgetExceeded(u64),
    #[error("no feasible (reps, steps) pair: {0}")]
    NoFeasiblePair(String),
    #[error("hamiltonian has no single-Z terms")]
    EmptyZHamiltonian,
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("ground-state overlap {0} is too small for a majority vote (needs > pi^2/16)")]
    OverlapTooSmall(f64),
    #[error("missing field for mode {mode}: {field}")]
    MissingField { mode: String, field: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI, one per error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Csv(_) => 3,
            Error::Parse { .. } | Error::EmptyInput | Error::Toml(_) | Error::Json(_) => 4,
            Error::MissingField { .. } | Error::InvalidParameter(_) => 5,
            Error::AdaptationExhausted { .. } | Error::ShotBudgetExceeded(_) => 6,
            _ => 7,
        }
    }
}
