use std::io;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("wrong record kind: expected {expected}, found {found}")]
    WrongRecordKind { expected: u8, found: u8 },
    #[error("truncated payload")]
    Truncated,
    #[error("trailing bytes after payload")]
    TrailingBytes,
    #[error("no samples")]
    NoSamples,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{what}: header declares {declared}, payload has {actual}")]
    CountMismatch { what: &'static str, declared: u64, actual: u64 },
    #[error("{0} does not fit its field")]
    Overflow(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] openpatch_core::Error),
}

impl FormatError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        FormatError::Invalid(msg.into())
    }

    /// Maps end-of-file to [`FormatError::Truncated`].
    pub(crate) fn from_read(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            FormatError::Truncated
        } else {
            FormatError::Io(e)
        }
    }
}
