use std::io;

use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate row {row}{}: zero norm", layer_suffix(*.layer))]
    DegenerateRow { layer: Option<usize>, row: usize },

    #[error("matrix is rank-deficient: {0}")]
    RankDeficient(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("power-law fit needs at least {needed} positive rates with distinct gains, got {got}")]
    InsufficientFitData { needed: usize, got: usize },

    #[error("bad magic in {what}: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { what: String, expected: u32, found: u32 },

    #[error("truncated {what}: expected {expected} bytes, found {found}")]
    Truncated { what: String, expected: usize, found: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

fn layer_suffix(layer: Option<usize>) -> String {
    match layer {
        Some(l) => format!(" at layer {l}"),
        None => String::new(),
    }
}

impl Error {
    /// Attaches a layer index to a degenerate-row error.
    pub fn at_layer(self, layer: usize) -> Self {
        match self {
            Error::DegenerateRow { row, .. } => Error::DegenerateRow { layer: Some(layer), row },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
