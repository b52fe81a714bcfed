use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("node `{node}`: shape mismatch: {detail}")]
    ShapeMismatch { node: String, detail: String },

    #[error("node `{node}`: unsupported op `{op}`")]
    UnsupportedOp { node: String, op: String },

    #[error("node `{node}`: invalid topology: {detail}")]
    Topology { node: String, detail: String },

    #[error("node `{node}`: output length would be {length}")]
    EmptyOutput { node: String, length: i64 },

    #[error("input has {got} elements, graph expects {expected}")]
    InputLength { expected: usize, got: usize },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("metric: {0}")]
    Metric(String),

    #[error("pruning: {0}")]
    Prune(String),

    #[error("node `{node}`: cannot propagate pruned indices through {op}")]
    Propagation { node: String, op: String },

    #[error("codegen: {0}")]
    Codegen(String),

    #[error("host build: {0}")]
    HostBuild(String),

    #[error("exploration: {0}")]
    Explore(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True when the error is caused by malformed user input (model, dataset,
    /// parameters) rather than by a failing pipeline stage.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::ShapeMismatch { .. }
                | Error::UnsupportedOp { .. }
                | Error::Topology { .. }
                | Error::EmptyOutput { .. }
                | Error::InputLength { .. }
                | Error::Dataset(_)
                | Error::File { .. }
                | Error::Json(_)
        )
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
