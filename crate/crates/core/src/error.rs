use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Hamming parameter m = {0} (need 3 <= m <= 7)")]
    InvalidSyndromeBits(u32),

    #[error("invalid block size {0} (need a power of two between 8 and 128)")]
    InvalidBlockSize(usize),

    #[error("invalid Hamming block length {0} (need 2^m - 1)")]
    InvalidHammingLength(usize),

    #[error("malformed block: expected {expected} bits, got {actual}")]
    MalformedBlock { expected: usize, actual: usize },

    #[error("bit value {value} at index {index} is not 0 or 1")]
    InvalidBit { index: usize, value: u8 },

    #[error("error count {n_i} out of range for block length {n}")]
    ErrorCountOutOfRange { n_i: usize, n: usize },

    #[error("enumeration of {patterns} patterns exceeds the cap of {cap}")]
    EnumerationCapExceeded { patterns: u128, cap: u128 },

    #[error("conditional transition undefined: no nonzero-syndrome patterns for {n_i} errors in {n_h} bits")]
    UndefinedConditional { n_h: usize, n_i: usize },

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("protocol abort: {0}")]
    ProtocolAbort(String),

    #[error("wire format error: {0}")]
    Wire(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}
