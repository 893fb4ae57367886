use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("predicate `{0}` is not in the vocabulary")]
    UnknownPredicate(String),

    #[error("triplet `{id}` has a degenerate {which} box {bbox:?}")]
    DegenerateBox {
        id: String,
        which: &'static str,
        bbox: [f64; 4],
    },

    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("logits contain a non-finite value at flat index {0}")]
    NonFiniteLogits(usize),

    #[error("invalid logits shape: {0}")]
    LogitsShape(String),

    #[error("phrase must be non-empty")]
    EmptyPhrase,

    #[error("phrase `{0}` has no embedding")]
    MissingPhrase(String),

    #[error("embedding table: {0}")]
    EmbeddingTable(String),

    #[error("unknown instance id `{0}`")]
    UnknownInstance(String),

    #[error("no prediction record for pool id `{0}`")]
    MissingRecord(String),

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("record `{0}` has no ranking key value")]
    MissingRankingKey(String),

    #[error("no recall given for predicate `{0}`")]
    MissingRecall(String),

    #[error("allocation for `{predicate}` is {requested} but only {available} available")]
    OverAllocation {
        predicate: String,
        requested: usize,
        available: usize,
    },

    #[error("partition: {0}")]
    Partition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
