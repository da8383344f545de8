use std::path::PathBuf;

use crate::minilang::ParseError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{version} version does not parse: {source}")]
    Parse {
        version: String,
        #[source]
        source: ParseError,
    },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("git: {0}")]
    Git(String),
    #[error("invalid refactoring record: {0}")]
    Record(String),
    #[error("invalid interference report: {0}")]
    Report(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("evaluation: {0}")]
    Eval(String),
    #[error("unit `{0}` missing from parent version")]
    MissingUnit(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json { context: context.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
