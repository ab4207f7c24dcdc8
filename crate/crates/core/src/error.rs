use thiserror::Error;

/// Every failure the library can report. The variant name is printed first
/// in each message so command-line diagnostics carry a stable error name.
#[derive(Debug, Error)]
pub enum Error {
    #[error("EmptyCorpus: no descriptions given")]
    EmptyCorpus,

    #[error("IdMismatch: {0}")]
    IdMismatch(String),

    #[error("TooFewVideos: need at least 2 videos, got {0}")]
    TooFewVideos(usize),

    #[error("RankTooLarge: requested {requested}, at most {max} available")]
    RankTooLarge { requested: usize, max: usize },

    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),

    #[error("NonFinite: {0}")]
    NonFinite(String),

    #[error("Diverged: non-finite parameter at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: u64 },

    #[error("BadAlpha: alpha must lie in (0.5, 1), got {0}")]
    BadAlpha(f64),

    #[error("EmptyQuery: event '{0}' shares no terms with the vocabulary")]
    EmptyQuery(String),

    #[error("BadWeight: {0}")]
    BadWeight(String),

    #[error("TooFewEligible: {eligible} eligible terms, {requested} requested")]
    TooFewEligible { eligible: usize, requested: usize },

    #[error("NoPositives: average precision needs at least one positive label")]
    NoPositives,

    #[error("Empty: {0}")]
    Empty(String),

    #[error("BadParam: {0}")]
    BadParam(String),

    #[error("Singular: {0}")]
    Singular(String),

    #[error("BadSpec: {0}")]
    BadSpec(String),

    #[error("Format: {0}")]
    Format(String),

    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::ShapeMismatch(msg.into())
}

pub(crate) fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}
