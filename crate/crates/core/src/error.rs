use thiserror::Error;

/// Failures raised by the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("materializing {requested} digits exceeds the cap of {cap}")]
    BudgetExceeded { requested: String, cap: u64 },
    #[error("position {position} is outside 1..={len}")]
    OutOfRange { position: String, len: String },
    #[error("block must be nonempty")]
    EmptyBlock,
    #[error("q_{n} = {value} is not a valid base (must be >= 2)")]
    InvalidBase { n: u64, value: String },
    #[error("divisibility violated: {0}")]
    Divisibility(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid descriptor: {0}")]
    Descriptor(String),
    #[error("schedule exhausted before position {0}")]
    ScheduleExhausted(String),
    #[error("digit {digit} at position {n} is not below q_n = {base}")]
    DigitOutOfRange { n: u64, digit: u64, base: String },
    #[error("index stream is not strictly increasing")]
    NonMonotone,
    #[error("guard exceeded: {0}")]
    Guard(String),
    #[error("counter overflow")]
    Overflow,
    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Descriptor(_) => 3,
            Error::BudgetExceeded { .. }
            | Error::Guard(_)
            | Error::ScheduleExhausted(_)
            | Error::Overflow => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
