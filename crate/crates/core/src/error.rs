//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("config parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("instability at step {step}, cell ({i}, {j}, {k}): {detail}")]
    Instability {
        step: usize,
        i: usize,
        j: usize,
        k: usize,
        detail: String,
    },

    #[error("extraction error: {0}")]
    Extraction(String),

    #[error("band unresolved: {0}")]
    BandUnresolved(String),

    #[error("metrics error: {0}")]
    Metrics(String),

    #[error("frequency {0} Hz was not recorded")]
    FrequencyNotRecorded(f64),

    #[error("touchstone format error at line {line}: {message}")]
    Touchstone { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
