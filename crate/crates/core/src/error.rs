use crate::types::Dims;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("intensity {value} at index {index} is outside [0, 1]")]
    OutOfRangeIntensity { index: usize, value: f64 },
    #[error("degenerate dimensions {height}x{width} (both must be at least 2)")]
    DegenerateDims { height: usize, width: usize },
    #[error("buffer holds {actual} values, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("invalid depth {value} at index {index}")]
    InvalidDepth { index: usize, value: f64 },
    #[error("matrix is not a proper rotation: {0}")]
    NotRotation(String),
    #[error("invalid intrinsics: {0}")]
    BadIntrinsics(String),

    #[error("factor {0} must be strictly positive and finite")]
    BadFactor(f64),
    #[error("hue delta {0} outside [-0.5, 0.5]")]
    BadDelta(f64),
    #[error("pixel fraction {0} outside (0, 1]")]
    BadFraction(f64),
    #[error("patch size {0} must be an odd positive integer")]
    BadPatchSize(usize),
    #[error("removal rate {0} outside [0, 1)")]
    BadRate(f64),

    #[error("transform record is empty")]
    EmptyRecord,
    #[error("non-invertible transform parameter: {0}")]
    NonInvertibleParam(String),
    #[error("bad range for {name}: {detail}")]
    BadRange { name: String, detail: String },
    #[error("inconsistent transform record: {0}")]
    InconsistentRecord(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimsMismatch { expected: Dims, actual: Dims },
    #[error("target {target} is smaller than item {item}")]
    TargetTooSmall { target: Dims, item: Dims },
    #[error("{images} neighbour images but {poses} poses")]
    PoseCountMismatch { images: usize, poses: usize },

    #[error("bad scene kind: {0}")]
    BadKind(String),
    #[error("camera motion leaves only {fraction:.3} of pixels in frame (need at least 0.5)")]
    ExcessiveMotion { fraction: f64 },
    #[error("requested {requested} points but the map has only {available} pixels")]
    TooManyPoints { requested: usize, available: usize },
    #[error("sparse depth map has no valid points")]
    NoSparsePoints,
    #[error("no pixels fall inside the evaluation range")]
    EmptyEvalSet,

    #[error("parse error: {0}")]
    ParseError(String),
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("image codec error on {path}: {message}")]
    Codec { path: String, message: String },
}

impl Error {
    /// Stable machine-readable identifier, used in CLI error lines and FFI messages.
    pub fn code(&self) -> &'static str {
        match self {
            Error::OutOfRangeIntensity { .. } => "OutOfRangeIntensity",
            Error::DegenerateDims { .. } => "DegenerateDims",
            Error::BufferLength { .. } => "BufferLength",
            Error::InvalidDepth { .. } => "InvalidDepth",
            Error::NotRotation(_) => "NotRotation",
            Error::BadIntrinsics(_) => "BadIntrinsics",
            Error::BadFactor(_) => "BadFactor",
            Error::BadDelta(_) => "BadDelta",
            Error::BadFraction(_) => "BadFraction",
            Error::BadPatchSize(_) => "BadPatchSize",
            Error::BadRate(_) => "BadRate",
            Error::EmptyRecord => "EmptyRecord",
            Error::NonInvertibleParam(_) => "NonInvertibleParam",
            Error::BadRange { .. } => "BadRange",
            Error::InconsistentRecord(_) => "InconsistentRecord",
            Error::DimsMismatch { .. } => "DimsMismatch",
            Error::TargetTooSmall { .. } => "TargetTooSmall",
            Error::PoseCountMismatch { .. } => "PoseCountMismatch",
            Error::BadKind(_) => "BadKind",
            Error::ExcessiveMotion { .. } => "ExcessiveMotion",
            Error::TooManyPoints { .. } => "TooManyPoints",
            Error::NoSparsePoints => "NoSparsePoints",
            Error::EmptyEvalSet => "EmptyEvalSet",
            Error::ParseError(_) => "ParseError",
            Error::MissingKey(_) => "MissingKey",
            Error::Io { .. } => "Io",
            Error::Codec { .. } => "Codec",
        }
    }

    pub(crate) fn bad_range(name: &str, detail: impl Into<String>) -> Self {
        Error::BadRange {
            name: name.to_string(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
