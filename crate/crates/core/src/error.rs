use std::path::PathBuf;

/// Errors raised across the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot project the zero vector onto the unit sphere")]
    ZeroVector,
    #[error("point coincides with the projection center (north pole)")]
    AtProjectionCenter,
    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),
    #[error("invalid projection parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("annotation {index} maps to the projection center")]
    PointAtProjectionCenter { index: usize },
    #[error("invalid kernel spec: {0}")]
    InvalidKernel(String),
    #[error("geometry-adaptive kernel needs at least {needed} annotations, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("count must be non-negative, got {0}")]
    NegativeCount(f64),
    #[error("invalid count bins: {0}")]
    InvalidBins(String),
    #[error("image must be square, got {width}x{height}")]
    NonSquareImage { width: usize, height: usize },
    #[error("image dimensions must be even, got {width}x{height}")]
    OddDimensions { width: usize, height: usize },
    #[error("degenerate convex hull: {0}")]
    DegenerateHull(String),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("manifest schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("malformed record {id}: {reason}")]
    MalformedRecord { id: String, reason: String },
    #[error("unknown group(s): {0:?}")]
    UnknownGroup(Vec<String>),
    #[error("records missing group key: {0:?}")]
    MissingGroupKey(Vec<String>),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("disk {index} lies behind the camera or on the projection center")]
    DiskBehindCamera { index: usize },
    #[error("point maps too close to the projection center")]
    NearSingularity,
    #[error("tissot direction {index} is too close to the projection center")]
    NearProjectionCenter { index: usize },
    #[error("prediction/ground-truth length mismatch: {pred} vs {gt}")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("missing density map(s) for: {0:?}")]
    MissingMap(Vec<String>),
    #[error("invalid float image container: {0}")]
    BadContainer(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ZeroVector => "ZeroVector",
            Error::AtProjectionCenter => "AtProjectionCenter",
            Error::InvalidRotation(_) => "InvalidRotation",
            Error::InvalidParams(_) => "InvalidParams",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::PointAtProjectionCenter { .. } => "PointAtProjectionCenter",
            Error::InvalidKernel(_) => "InvalidKernel",
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::NegativeCount(_) => "NegativeCount",
            Error::InvalidBins(_) => "InvalidBins",
            Error::NonSquareImage { .. } => "NonSquareImage",
            Error::OddDimensions { .. } => "OddDimensions",
            Error::DegenerateHull(_) => "DegenerateHull",
            Error::InvalidPolygon(_) => "InvalidPolygon",
            Error::SchemaVersionMismatch { .. } => "SchemaVersionMismatch",
            Error::MalformedRecord { .. } => "MalformedRecord",
            Error::UnknownGroup(_) => "UnknownGroup",
            Error::MissingGroupKey(_) => "MissingGroupKey",
            Error::InvalidScene(_) => "InvalidScene",
            Error::DiskBehindCamera { .. } => "DiskBehindCamera",
            Error::NearSingularity => "NearSingularity",
            Error::NearProjectionCenter { .. } => "NearProjectionCenter",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::EmptyInput => "EmptyInput",
            Error::MissingMap(_) => "MissingMap",
            Error::BadContainer(_) => "BadContainer",
            Error::Io { .. } => "Io",
            Error::Json { .. } => "Json",
            Error::Image(_) => "Image",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
