use std::io;
use std::path::PathBuf;

/// Coarse classification used by front ends to choose an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters or inconsistent inputs detected before doing work.
    Validation,
    /// Input data is unusable (corrupt file, degenerate corpus, mismatched model).
    Data,
    /// The operating system refused a read or write.
    Io,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: unsupported format: {reason}", path.display())]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("{}: corrupt file: {reason}", path.display())]
    Corrupt { path: PathBuf, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("image {width}x{height} is smaller than requested side {side}")]
    ImageTooSmall { width: u32, height: u32, side: u32 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty dataset manifest")]
    EmptyLibrary,
    #[error("{}: {source}", path.display())]
    InImage {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
    #[error("degenerate corpus: patches have no variance")]
    DegenerateCorpus,
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("model and library do not match: {0}")]
    ModelMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Corrupt {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::InvalidParameter(_) | Error::ImageTooSmall { .. } | Error::EmptyLibrary => {
                ErrorKind::Validation
            }
            Error::InImage { source, .. } => source.kind(),
            Error::UnsupportedFormat { .. }
            | Error::Corrupt { .. }
            | Error::DimensionMismatch(_)
            | Error::DegenerateCorpus
            | Error::EmptyCluster(_)
            | Error::ModelMismatch(_) => ErrorKind::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
