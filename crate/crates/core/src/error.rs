use thiserror::Error;

/// Errors produced while reading PLY files.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlyError {
    #[error("malformed PLY header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },
    #[error("unsupported PLY format token `{token}` at byte {offset}")]
    UnsupportedFormat { offset: usize, token: String },
    #[error("truncated PLY payload at byte {offset}")]
    Truncated { offset: usize },
    #[error("invalid vertex value at byte {offset}: {reason}")]
    InvalidValue { offset: usize, reason: String },
}

/// Errors produced while parsing a coded stream.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum StreamError {
    #[error("bad stream magic")]
    BadMagic,
    #[error("unsupported stream version {0}")]
    UnsupportedVersion(u8),
    #[error("stream was encoded with model {stream:016x}, decoder has {model:016x}")]
    ModelMismatch { stream: u64, model: u64 },
    #[error("truncated stream: {0}")]
    Truncated(&'static str),
    #[error("invalid stream field: {0}")]
    InvalidField(String),
}

/// Errors produced while reading a model file.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("bad model magic")]
    BadMagic,
    #[error("unsupported model version {0}")]
    UnsupportedVersion(u8),
    #[error("model checksum mismatch")]
    ChecksumMismatch,
    #[error("truncated model file")]
    Truncated,
    #[error("invalid model field: {0}")]
    InvalidField(String),
}

/// Errors produced during transform/codebook/model training.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("no training data")]
    NoTrainingData,
    #[error("degenerate training set: {0}")]
    Degenerate(String),
    #[error("insufficient samples at {level}: have {have}, need {need}")]
    InsufficientSamples { level: String, have: usize, need: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ply(#[from] PlyError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("model has no entry for leaf side {side} ({layout})")]
    MissingModelEntry { side: usize, layout: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
