use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An operation was called with arguments violating its preconditions.
    #[error("{op}: {msg}")]
    Contract { op: &'static str, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot load dataset entry {entry}: {msg}")]
    Load { entry: String, msg: String },

    #[error("corrupt checkpoint ({field}): {msg}")]
    CorruptCheckpoint { field: String, msg: String },

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("non-finite loss at step {step}: {terms}")]
    NonFiniteLoss { step: u64, terms: String },

    #[error("no valid ground-truth pixels within the depth range")]
    NoValidPixels,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn contract(op: &'static str, msg: impl Into<String>) -> Self {
        Self::Contract {
            op,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
