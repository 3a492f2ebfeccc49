use thiserror::Error;

/// Errors raised across ingestion, synthesis, estimation and fitting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),
    #[error("length error: expected {expected} bytes, found {found}")]
    Length { expected: usize, found: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("modality error: {0}")]
    Modality(String),
    #[error("bounds error: {0}")]
    Bounds(String),
    #[error("partition family error: {0}")]
    Family(String),
    #[error("partition error: {0}")]
    Partition(String),
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error("numerical rank error: {0}")]
    NumericalRank(String),
    #[error("network composition error: {0}")]
    Composition(String),
    #[error("network state error: {0}")]
    State(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("batch error: {0}")]
    Batch(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("ordering incompatible: {0}")]
    OrderingIncompatible(String),
    #[error("training instability at iteration {iteration}: bound = {bound}")]
    TrainingInstability {
        iteration: usize,
        bound: f64,
        trace: Box<crate::mine::MineTrace>,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("at L = {l}: {source}")]
    AtCut {
        l: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
