use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("position {n} is outside the domain of an explicit list of length {len}")]
    OutOfDomain { n: u64, len: u64 },

    #[error("positions are 1-based; got 0")]
    ZeroPosition,

    #[error("invalid basic sequence: {0}")]
    InvalidRule(String),

    #[error("value {0} is outside [0, 1)")]
    OutsideUnitInterval(String),

    #[error("digit {digit} at position {n} is not below its base {q}")]
    DigitOutOfRange { n: u64, digit: String, q: String },

    #[error("need {needed} digits but only {available} are available")]
    InsufficientDigits { needed: u64, available: u64 },

    #[error("empty block")]
    EmptyBlock,

    #[error("empty point sequence")]
    EmptySequence,

    #[error("threshold {0} is outside (0, 1]")]
    InvalidThreshold(String),

    #[error("point sequence is not strictly increasing at index {0}")]
    Unsorted(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("base sequence has no certified monotone tail; cannot compute nu_{0}")]
    UncertifiedTail(usize),

    #[error("q_n never reaches {threshold} within {budget} positions (computing nu_{j})")]
    ThresholdNotCrossed { j: usize, threshold: String, budget: u64 },

    #[error("schedule invariant violated: {0}")]
    ScheduleInvariant(String),

    #[error("position {n} is beyond the scheduled range (last scheduled position {last})")]
    BeyondSchedule { n: u64, last: u64 },

    #[error("(j, b, c) = ({j}, {b}, {c}) is not a scheduled coordinate")]
    NotInSchedule { j: usize, b: u64, c: u64 },

    #[error("shift k = {k} must be below S_{j} = {s}")]
    ShiftOutOfRange { j: usize, k: u64, s: u64 },

    #[error("chain level {j} exceeds depth {depth}")]
    LevelOutOfRange { j: usize, depth: usize },

    #[error("{count} basic intervals exceed the guard of {guard}")]
    TooManyIntervals { count: String, guard: u64 },

    #[error("gap sizes are not strictly decreasing at level {0}")]
    GapsNotDecreasing(usize),

    #[error("m_k * eps_k >= 1 at level {0}; the log argument is not below 1")]
    NonpositiveLogArgument(usize),

    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
