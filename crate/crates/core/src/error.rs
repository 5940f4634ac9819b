use thiserror::Error;

/// Errors raised by the assessment library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("duplicate counter id `{0}`")]
    DuplicateCounter(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    RowArity {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column `{column}`: `{value}` is not an unsigned 64-bit integer")]
    BadValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("csv: {0}")]
    Csv(String),
    #[error("traces have unequal lengths (`{id}` has {found}, expected {expected})")]
    UnequalLengths {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid counter id `{0}`")]
    InvalidCounterId(String),
    #[error("timestamps: {0}")]
    Timestamps(String),
    #[error("trace `{id}` too short: {len} samples, need at least {need}")]
    TraceTooShort { id: String, len: usize, need: usize },
    #[error("alpha {0} must divide 64")]
    InvalidAlpha(u32),
    #[error("invalid packing: alpha {alpha} into {symbol_width}-bit symbols")]
    InvalidWidth { alpha: u32, symbol_width: u32 },
    #[error("empty symbol stream")]
    EmptyStream,
    #[error("stream lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("window of {window} exceeds stream length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("exactly 3 runs required, got {0}")]
    RunCount(usize),
    #[error("counter sets differ: {0}")]
    CounterSetMismatch(String),
    #[error("missing combined metric for counter `{0}`")]
    MissingMetric(String),
    #[error("assessment of `{id}` has no entry for alpha {alpha}")]
    MissingAlpha { id: String, alpha: u32 },
    #[error("synth spec: {0}")]
    Spec(String),
    #[error("report: {0}")]
    Report(String),
}

pub type Result<T> = std::result::Result<T, Error>;
