use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot compute corpus statistics over an empty collection")]
    EmptyCorpus,

    #[error("question text is empty")]
    EmptyQuestion,

    #[error("justification set is empty")]
    EmptySet,

    #[error("set size k = {k} is not feasible for {n} candidates")]
    InfeasibleK { k: usize, n: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("invalid index cache: {0}")]
    Cache(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than by the caller's
    /// configuration or the environment.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyCorpus
                | Error::EmptyQuestion
                | Error::EmptySet
                | Error::InfeasibleK { .. }
                | Error::Parse { .. }
                | Error::Cache(_)
                | Error::InvalidData(_)
        )
    }
}
