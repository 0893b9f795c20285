use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("layer {layer}: {detail}")]
    LayerShape { layer: usize, detail: String },

    #[error("unknown activation `{0}`")]
    UnknownActivation(String),

    #[error("invalid activation parameter: {0}")]
    InvalidActivation(String),

    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("interval arithmetic produced a non-finite bound")]
    NonFinite,

    #[error("empty box")]
    EmptyBox,

    #[error("box has no non-degenerate dimension, its boundary is empty")]
    DegenerateBox,

    #[error("safe set constrains no dimension")]
    UnconstrainedSafeSet,

    #[error("determinant of a {0}x{0} interval matrix is not supported (max 8)")]
    UnsupportedSize(usize),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("layer range {from}..={to} out of range for a {len}-layer network")]
    SliceOutOfRange { from: usize, to: usize, len: usize },

    #[error("the {engine} engine does not support the {activation} activation")]
    UnsupportedActivation {
        engine: &'static str,
        activation: String,
    },

    #[error("homeomorphism could not be certified over the input box")]
    HomeomorphismNotCertified,

    #[error("no suffix of the network is certified as an open map")]
    NoOpenSuffix,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("gave up after {0} rejection rounds")]
    GaveUp(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
