use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid excursion: {0}")]
    InvalidExcursion(String),
    #[error("time {t} is not on the grid of size {grid}")]
    OffGrid { t: f64, grid: usize },
    #[error("invalid search-depth sequence: {0}")]
    InvalidDepth(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("vertex {0} is not in the tree")]
    UnknownVertex(usize),
    #[error("trees have different shapes")]
    ShapeMismatch,
    #[error("rejection sampling exhausted its budget of {0} attempts")]
    BudgetExhausted(u64),
    #[error("path too short: need horizon {required}, have {available}")]
    PathTooShort { required: usize, available: usize },
    #[error("grid spacing {h} is coarser than the shortest edge {min_edge}")]
    GridTooCoarse { h: f64, min_edge: f64 },
    #[error("subtree has no edges")]
    DegenerateSubtree,
    #[error("singular linear system")]
    Singular,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
