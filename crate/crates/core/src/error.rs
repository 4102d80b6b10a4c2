use thiserror::Error;

use crate::model::NodeId;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the simulator can surface. Display strings start with the
/// variant name so callers (and the CLI) can match on them textually.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("DisconnectedTopology: node {node} has no path to the sink")]
    DisconnectedTopology { node: NodeId },

    #[error("NoRoute: no path from node {from} to {target}")]
    NoRoute { from: NodeId, target: String },

    #[error("StaleReading: reading from node {source_id} has round {reading_round}, expected {expected}")]
    StaleReading {
        source_id: NodeId,
        reading_round: u64,
        expected: u64,
    },

    #[error("EmptySnapshot: redundancy ratio of an empty snapshot is undefined")]
    EmptySnapshot,

    #[error("EmptyTrainingSet: no labeled examples to train on")]
    EmptyTrainingSet,

    #[error("UntrainedModel: no classifier supplied and the symbolic-only rule is disabled")]
    UntrainedModel,

    #[error("InvalidScenario: {0}")]
    InvalidScenario(String),

    #[error("UnknownKey: `{key}` at line {line}")]
    UnknownKey { key: String, line: usize },

    #[error("MalformedLine: line {line}: {text:?}")]
    MalformedLine { line: usize, text: String },

    #[error("InvalidValue: key `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },

    #[error("ModelFile: {0}")]
    ModelFile(String),

    #[error("Io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
