use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Reasons a binary distance archive can fail to decode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArchiveFault {
    BadMagic,
    Truncated,
    NegativeValue,
    NonFiniteValue,
    DuplicateKey(String, String),
    InvalidUtf8,
    InvalidSchema(String),
    TrailingBytes,
}

impl std::fmt::Display for ArchiveFault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ArchiveFault::BadMagic => write!(f, "bad magic (expected \"FDX1\")"),
            ArchiveFault::Truncated => write!(f, "truncated record"),
            ArchiveFault::NegativeValue => write!(f, "negative value"),
            ArchiveFault::NonFiniteValue => write!(f, "non-finite value"),
            ArchiveFault::DuplicateKey(s, i) => write!(f, "duplicate key ({s}, {i})"),
            ArchiveFault::InvalidUtf8 => write!(f, "id is not valid UTF-8"),
            ArchiveFault::InvalidSchema(m) => write!(f, "invalid schema: {m}"),
            ArchiveFault::TrailingBytes => write!(f, "trailing bytes after last record"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}{}: {message}", location.as_deref().unwrap_or("input"), line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Parse {
        location: Option<String>,
        line: Option<usize>,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("schema mismatch at layer `{layer}`: {detail}")]
    SchemaMismatch { layer: String, detail: String },

    #[error("negative weight {value} at layer `{layer}` channel {channel}")]
    NegativeWeight {
        layer: String,
        channel: usize,
        value: f64,
    },

    #[error("archive error at byte offset {offset}: {fault}")]
    Archive { offset: u64, fault: ArchiveFault },

    #[error("missing distance tensor for ({set_id}, {image_id})")]
    MissingTensor { set_id: String, image_id: String },

    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse_at(location: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            location: Some(location.into()),
            line: Some(line),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end:
    /// 2 input validation, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 4,
            Error::Numerical(_) | Error::Undefined(_) => 3,
            _ => 2,
        }
    }
}
