use std::path::PathBuf;

use thiserror::Error;

use crate::stream::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot sample {m} distinct edges from {n} nodes (max {max})")]
    TooManyEdges { n: u64, m: u64, max: u64 },

    #[error("instrumentation was not enabled for this run")]
    InstrumentationOff,

    #[error("incomplete node assignment: node {0} is unmapped")]
    UnassignedNode(NodeId),

    #[error("{0}")]
    Metric(String),

    #[error("experiment spec: {0}")]
    Spec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
