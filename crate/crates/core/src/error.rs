use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },

    #[error("data length {len} does not match {width}x{height}")]
    DataLength { width: usize, height: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("four-color value {value} at pixel {index} is outside 0..=4")]
    InvalidColor { index: usize, value: u32 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid color assignment: {0}")]
    InvalidAssignment(String),

    #[error("node {0} has no color")]
    UncoveredNode(u32),

    #[error("encoding matrix row {0} is not one-hot")]
    NotOneHot(usize),

    #[error("graph has {nodes} nodes, exact search limit is {limit}")]
    NodeLimitExceeded { nodes: usize, limit: usize },

    #[error("graph is not 4-colorable; dense clique: {clique:?}")]
    NotFourColorable { clique: Vec<u32> },

    #[error("probability {value} at index {index} is outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },

    #[error("zero-norm feature vector for cell {0}")]
    ZeroNorm(u32),

    #[error("cell {0} has no pixels")]
    EmptyCell(u32),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("malformed input {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(a: (usize, usize), b: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left_width: a.0,
            left_height: a.1,
            right_width: b.0,
            right_height: b.1,
        }
    }
}
