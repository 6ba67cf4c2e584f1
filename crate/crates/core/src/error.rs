use thiserror::Error;

/// Errors raised by the library.
///
/// Decoder failures are not errors; they are reported through outcome values.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported field order m={0} (expected 2..=16)")]
    UnsupportedField(u32),
    #[error("field mismatch: GF(2^{left}) vs GF(2^{right})")]
    FieldMismatch { left: u32, right: u32 },
    #[error("value {value} is not an element of GF(2^{m})")]
    NotInField { value: u32, m: u32 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("invalid BCH design: {0}")]
    InvalidDesign(String),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid code: {0}")]
    InvalidCode(String),
    #[error("k={0} is too large for exhaustive enumeration (limit 20)")]
    TooLarge(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("softmax row {0} has no unmasked entries")]
    AllMaskedRow(usize),
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("empty batch")]
    EmptyBatch,
    #[error("no frames fell in the conditioning event")]
    EmptyCondition,
    #[error("rejection sampling retained fraction {fraction:.3e} below limit")]
    PathologicalRejection { fraction: f64 },
    #[error("training diverged at step {step} (non-finite loss)")]
    Divergence { step: u64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
