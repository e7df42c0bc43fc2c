use std::io;

use thiserror::Error;

/// Problems found while decoding one of the binary file formats.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("truncated payload while reading {0}")]
    Truncated(&'static str),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("trailing bytes after payload")]
    TrailingBytes,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate input: {samples} samples for {components} components")]
    DegenerateInput { samples: usize, components: usize },
    #[error("component {component} lost all responsibility mass")]
    DegenerateComponent { component: usize },
    #[error("class {0} is already present")]
    DuplicateClass(u32),
    #[error("class {0} is unknown")]
    UnknownClass(u32),
    #[error("memory is empty")]
    EmptyMemory,
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("task {task}: {source}")]
    Task {
        task: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn at_task(self, task: usize) -> Self {
        Error::Task {
            task,
            source: Box::new(self),
        }
    }

    /// Coarse category used for process exit codes.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Task { source, .. } => source.category(),
            Error::Config(_) | Error::InvalidParameter(_) => ErrorCategory::Config,
            Error::Parse(_) | Error::Io(_) | Error::Csv(_) => ErrorCategory::Io,
            Error::DegenerateInput { .. }
            | Error::DegenerateComponent { .. }
            | Error::Divergence { .. } => ErrorCategory::Numeric,
            Error::Shape(_)
            | Error::EmptyInput(_)
            | Error::DuplicateClass(_)
            | Error::UnknownClass(_)
            | Error::EmptyMemory => ErrorCategory::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Io,
    Data,
    Numeric,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Io => 3,
            ErrorCategory::Data => 4,
            ErrorCategory::Numeric => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
