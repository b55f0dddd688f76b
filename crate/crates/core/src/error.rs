use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty tensor")]
    EmptyTensor,
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("kernel {kernel}x{kernel} does not fit padded input {height}x{width} (pad {pad})")]
    KernelTooLarge {
        kernel: usize,
        height: usize,
        width: usize,
        pad: usize,
    },
    #[error("batch of size 0")]
    EmptyBatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("backward called before forward")]
    BackwardBeforeForward,
    #[error("missing saved forward context for node {0}")]
    MissingContext(usize),
    #[error("freeze contract violated: {0}")]
    FreezeState(String),
    #[error("mask in {mode} mode; operation requires {required}")]
    MaskMode {
        mode: &'static str,
        required: &'static str,
    },
    #[error("unknown architecture `{0}`")]
    UnknownArchitecture(String),
    #[error("checkpoint version mismatch: file has version {found}, this build reads version {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt file at byte offset {offset}: {reason}")]
    Corrupt { offset: u64, reason: String },
    #[error("exhaustive search over {filters} filters exceeds the limit of {limit}")]
    SearchTooLarge { filters: usize, limit: usize },
    #[error("{stage}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}
