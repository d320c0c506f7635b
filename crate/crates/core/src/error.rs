//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("unknown environment variant `{name}`; valid names: {valid}")]
    UnknownVariant { name: String, valid: String },

    #[error("episode already finished at step {step} (horizon {horizon})")]
    EpisodeDone { step: usize, horizon: usize },

    #[error("head index {head} out of range for network with {n_heads} heads")]
    HeadOutOfRange { head: usize, n_heads: usize },

    #[error("non-finite {what}: {detail}")]
    NonFinite { what: String, detail: String },

    #[error("checkpoint format version {found} unsupported (this build reads version {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("malformed checkpoint: {0}")]
    CheckpointMalformed(String),

    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("{teachers} teacher checkpoint(s) supplied for {envs} environment(s)")]
    TeacherCountMismatch { teachers: usize, envs: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.into(),
            actual: actual.into(),
        }
    }

    pub(crate) fn non_finite(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::NonFinite {
            what: what.into(),
            detail: detail.into(),
        }
    }
}
