use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{0}: no edges")]
    EmptyGraph(PathBuf),

    #[error("no cascades")]
    NoCascades,

    #[error("node id {id} out of range (node count {node_count})")]
    NodeOutOfRange { id: u32, node_count: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("singular fit: column `{column}` is degenerate")]
    SingularFit { column: &'static str },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("link density undefined for fewer than two adopters")]
    UndefinedDensity,

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ConfigMismatch(_) => 2,
            Error::Parse { .. }
            | Error::Io { .. }
            | Error::EmptyGraph(_)
            | Error::NoCascades
            | Error::NodeOutOfRange { .. }
            | Error::Data(_)
            | Error::Empty(_) => 3,
            Error::SingularFit { .. }
            | Error::NonFinite(_)
            | Error::UndefinedDensity
            | Error::UndefinedCorrelation(_) => 4,
        }
    }
}
