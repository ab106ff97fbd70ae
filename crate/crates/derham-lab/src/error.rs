use thiserror::Error;

#[derive(Debug, Error)]
pub enum DerhamError {
    #[error("duplicate vertex {0} inside a simplex")]
    DuplicateVertex(u32),
    #[error("edge length must be positive, got {0}")]
    NonpositiveEdgeLength(f64),
    #[error("unknown vertex {0}")]
    UnknownVertex(u32),
    #[error("unknown face {0:?}")]
    UnknownFace(Vec<u32>),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degree out of range: {0}")]
    DegreeOutOfRange(String),
    #[error("skeleton dimension {0} out of range (complex has dimension {1})")]
    SkeletonOutOfRange(usize, usize),
    #[error("path segment not contained in a single simplex")]
    PathSegmentNotInSimplex,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("form is not closed")]
    NotClosed,
    #[error("form is not in ker(I): simplex {0:?} has integral {1}")]
    NotInKernel(Vec<u32>, f64),
    #[error("unsupported vector field: {0}")]
    UnsupportedField(String),
    #[error("missing star chart for vertex {0}")]
    MissingChart(u32),
    #[error("incompatible traces: {0}")]
    IncompatibleTraces(String),
    #[error("invalid bouquet presentation: {0}")]
    InvalidBouquet(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DerhamError>;
