use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SidError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SidError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),

    #[error("invalid environment graph: {0}")]
    InvalidGraph(String),

    #[error("unknown viewpoint `{0}`")]
    UnknownViewpoint(String),

    #[error("unknown environment `{0}`")]
    UnknownEnvironment(String),

    #[error("viewpoint `{to}` is unreachable from `{from}`")]
    Unreachable { from: String, to: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("panorama size {0} must be even and at least 4")]
    OddPanorama(usize),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid goal: {0}")]
    InvalidGoal(String),

    #[error("invalid demonstration: {0}")]
    InvalidDemonstration(String),

    #[error("supervision target is not a legal candidate: {0}")]
    IllegalTarget(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("round {round} produced no successful demonstrations")]
    EmptyRound { round: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl SidError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SidError::Io { path: path.into(), source }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        SidError::Parse { line, message: message.into() }
    }
}
