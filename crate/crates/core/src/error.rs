use std::path::PathBuf;

/// Errors shared across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("duplicate record for poi `{poi}` at cycle {cycle}")]
    DuplicateRecord { poi: String, cycle: usize },
    #[error("missing cell: poi `{poi}` has no record for cycle {cycle}")]
    MissingCell { poi: String, cycle: usize },
    #[error("invalid state {state} for poi `{poi}` at cycle {cycle}: expected 0 or 1")]
    InvalidState {
        poi: String,
        cycle: usize,
        state: i64,
    },
    #[error("empty series")]
    EmptySeries,
    #[error("series length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("cycle {cycle} outside 1..={max}")]
    InvalidCycle { cycle: usize, max: usize },
    #[error("history horizon {horizon} outside 1..={max}")]
    InvalidHorizon { horizon: usize, max: usize },
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("missing history: {0}")]
    MissingHistory(String),
    #[error("known-state map does not match mask: {0}")]
    MaskMismatch(String),
    #[error("{name} = {value} outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("known set is empty")]
    EmptyKnownSet,
    #[error("{nodes} nodes exceed the exhaustive-search limit of {max}")]
    TooManyNodes { nodes: usize, max: usize },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("invalid selection problem: {0}")]
    InvalidProblem(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("unknown poi `{0}`")]
    UnknownPoi(String),
    #[error("curve shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("io error on `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
