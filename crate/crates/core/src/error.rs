use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("node `{0}` not found")]
    NodeNotFound(String),
    #[error("invalid node label `{0}`")]
    InvalidLabel(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("invalid edge {0} - {1}: {2}")]
    InvalidEdge(String, String, &'static str),
    #[error("edge {0} - {1} not found")]
    EdgeNotFound(String, String),
    #[error("graph is not a DAG")]
    NotADag,
    #[error("partially directed graph has no consistent DAG extension")]
    NotExtendable,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("unknown state `{value}` in column `{column}`")]
    UnknownState { column: String, value: String },
    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),
    #[error("invalid reconstruction: {0}")]
    InvalidReconstruction(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
