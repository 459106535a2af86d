use thiserror::Error;

/// Errors raised by models, samplers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("site index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("invalid bit value {0}, expected 0 or 1")]
    InvalidBit(u8),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scale {scale} out of range [1, {max}]")]
    ScaleOutOfRange { scale: usize, max: usize },

    #[error("{0} is not a product model")]
    UnsupportedModel(&'static str),

    #[error("trace too short: {len} < {min}")]
    TraceTooShort { len: usize, min: usize },

    #[error("enumeration too large: {0}")]
    TooLarge(String),

    #[error("malformed RBM weights file: {0}")]
    MalformedRbm(String),

    #[error("IDX file has bad magic {found:#010x}, expected {expected:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("IDX file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("IDX dimensions overflow: {0:?}")]
    DimensionOverflow(Vec<u32>),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
