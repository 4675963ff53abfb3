use std::path::PathBuf;

/// Errors produced anywhere in the segmentation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty sentence")]
    EmptySentence,

    #[error("empty word in sentence")]
    EmptyWord,

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("backward already ran on this graph; call zero_grad first")]
    BackwardTwice,

    #[error("loss must be a 1x1 tensor, got {0:?}")]
    NonScalarLoss((usize, usize)),

    #[error("invalid tag {0:?}")]
    InvalidTag(String),

    #[error("era id {era} out of range for {eras} eras")]
    EraOutOfRange { era: usize, eras: usize },

    #[error("hard switching during training requires a gold era")]
    MissingGoldEra,

    #[error("config error: {0}")]
    Config(String),

    #[error("sentence {index}: characters of gold and prediction differ")]
    CharMismatch { index: usize },

    #[error("{path}:{line}: {msg}")]
    Data {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error("training diverged at epoch {epoch}, sentence {sentence}: {msg}")]
    Diverged {
        epoch: usize,
        sentence: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
