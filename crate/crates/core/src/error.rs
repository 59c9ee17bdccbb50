use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("block length {0} is not a power of two in [2, 2^20]")]
    BadBlockLength(usize),
    #[error("info length {k} out of range for block length {n}")]
    BadInfoLength { n: usize, k: usize },
    #[error("duplicate frozen index {0}")]
    DuplicateIndex(usize),
    #[error("frozen index {index} out of range for block length {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("malformed frozen-set entry {token:?} on line {line}")]
    Malformed { line: usize, token: String },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{op} needs an input of length at least {min}, got {got}")]
    TooShort { op: &'static str, min: usize, got: usize },
    #[error("invalid compiler configuration: {0}")]
    BadConfig(String),
    #[error("invalid quantization {0:?}")]
    BadQuant(String),
    #[error("instruction {index} reads slot {slot} before it is written")]
    SlotUnderflow { index: usize, slot: String },
    #[error("invalid program: {0}")]
    BadProgram(String),
    #[error("unknown netlist format {0:?}")]
    UnknownFormat(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than I/O or internal faults.
    pub fn is_usage(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Json(_) | Error::SlotUnderflow { .. })
    }
}
