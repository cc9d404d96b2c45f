use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A row of an input file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// Input is well-formed but violates a data invariant (duplicate id, dangling endpoint).
    #[error("integrity error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Integrity { line: Option<u64>, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("rank-deficient design: columns {} are collinear", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("optimization diverged at epoch {epoch}: {message}")]
    Divergence { epoch: usize, message: String },

    #[error("identification error: {0}")]
    Identification(String),

    #[error("no qualifying tetrads: {0}")]
    EmptySample(String),

    #[error("{0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from the supplied data rather than configuration or numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Parse { .. } | Error::Integrity { .. } | Error::Schema(_)
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::Divergence { .. }
                | Error::Identification(_)
                | Error::EmptySample(_)
                | Error::Numerical(_)
        )
    }
}
