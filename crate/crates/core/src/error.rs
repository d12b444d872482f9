use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("node {node}: threshold {threshold} exceeds out-degree {out_degree}")]
    ThresholdExceedsDegree {
        node: usize,
        threshold: u32,
        out_degree: u32,
    },

    #[error("node id {id} out of range for {n} nodes")]
    NodeOutOfRange { id: usize, n: usize },

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("not a tree: {0}")]
    NotATree(String),

    #[error("invalid statistics: {0}")]
    InvalidStatistics(String),

    #[error("statistics incompatible with n = {n}: {reason}")]
    Incompatible { n: u64, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fixed points not separated at refinement depth {depth} near x = {x}")]
    RootsNotSeparated { depth: u32, x: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error record.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ThresholdExceedsDegree { .. } => "threshold_exceeds_degree",
            Error::NodeOutOfRange { .. } => "node_out_of_range",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::NotATree(_) => "not_a_tree",
            Error::InvalidStatistics(_) => "invalid_statistics",
            Error::Incompatible { .. } => "incompatible",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::RootsNotSeparated { .. } => "roots_not_separated",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
