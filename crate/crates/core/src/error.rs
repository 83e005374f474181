use std::io;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum HkdError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// `|alpha * dt|` exceeded the exponent guard.
    #[error("exponent overflow: |alpha * dt| = {value} exceeds {limit}")]
    Overflow { value: f64, limit: f64 },

    #[error("matrix is defective or ill-conditioned (condition number {condition:.3e})")]
    Conditioning { condition: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("unsupported format version {found} (max supported {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("corrupt file at byte offset {offset}: {detail}")]
    Corrupt { offset: u64, detail: String },

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("parameter `{name}` has shape {found:?}, config requires {expected:?}")]
    ParamShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl HkdError {
    /// Process exit code: 2 config/argument, 3 I/O or format, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        use HkdError::*;
        match self {
            Shape(_) | InvalidArgument(_) | Config(_) | UnknownKey(_) | ParamShape { .. } => 2,
            BadMagic { .. } | UnsupportedVersion { .. } | Corrupt { .. } | SizeLimit(_) | Io(_) => 3,
            Overflow { .. } | Conditioning { .. } | NonFinite(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, HkdError>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(HkdError::Shape(msg.into()))
}
