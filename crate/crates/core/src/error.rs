use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed thread file: {0}")]
    Malformed(String),
    #[error("thread has no root comment (every comment has a parent_id)")]
    NoRoot,
    #[error("thread has multiple roots: {0} and {1}")]
    MultipleRoots(String, String),
    #[error("comment {id} replies to unknown parent {parent}")]
    DanglingParent { id: String, parent: String },
    #[error("comment {0} is part of a reply cycle")]
    Cycle(String),
    #[error("duplicate comment id {0}")]
    DuplicateId(String),
    #[error("comment {id} has gold label {label}, expected 0..=4")]
    LabelOutOfRange { id: String, label: i64 },
    #[error("comment id must be nonempty")]
    EmptyId,
    #[error("thread has {0} comments, the maximum is {max}", max = crate::discussion::MAX_NODES)]
    TooLarge(usize),
    #[error("unknown comment id {0}")]
    UnknownId(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("no labeled nodes to score")]
    NoLabels,
    #[error("node {0} has no gold label")]
    MissingLabel(String),
    #[error("score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),

    #[error("unsupported checkpoint format_version {0}")]
    FormatVersion(u64),
    #[error("checkpoint encoder width {encoder} does not match model input_dim {model}")]
    EncoderMismatch { encoder: usize, model: usize },
    #[error("model was trained with encoder {model} but {requested} was requested")]
    EncoderSpecMismatch { model: String, requested: String },
    #[error("trajectory does not match graph: {0}")]
    TrajectoryMismatch(String),
    #[error("manifest does not match graph {0}")]
    ManifestMismatch(String),
    #[error("unsatisfiable generator spec: {0}")]
    Unsatisfiable(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
