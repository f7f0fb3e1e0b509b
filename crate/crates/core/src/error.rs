use thiserror::Error;

/// Errors surfaced by the sketch, its oracle and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("timestamp {now} precedes the latest subwindow start {latest}")]
    RegressingClock { now: u64, latest: u64 },

    #[error("invalid item: {0}")]
    InvalidItem(String),

    #[error("subgraph pattern is empty")]
    EmptyPattern,

    #[error("path queries require the vertex registry (enable `path_queries`)")]
    PathQueriesDisabled,

    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),

    #[error("relative error is undefined for a zero ground truth")]
    ZeroTruth,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("infeasible generator spec: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
