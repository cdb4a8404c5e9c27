use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("corpus too small: requested vocabulary size {requested}, at most {achievable} is achievable")]
    CorpusTooSmall { requested: usize, achievable: usize },

    #[error("cannot encode {ch:?} at offset {offset} inside {kind} span")]
    Unrepresentable {
        kind: &'static str,
        offset: usize,
        ch: char,
    },

    #[error("unknown token id {0}")]
    UnknownId(u32),

    #[error("malformed document: {0}")]
    Markup(String),

    #[error("sequence length {len} exceeds context length {max}")]
    ContextOverflow { len: usize, max: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("step {step} outside schedule [0, {total}]")]
    StepOutOfRange { step: usize, total: usize },

    #[error("perplexity calibration infeasible for rows {rows:?}")]
    Perplexity { rows: Vec<usize> },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("bad file format in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
