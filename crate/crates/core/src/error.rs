use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("trajectory too short")]
    TrajectoryTooShort,
    #[error("timestamps must be strictly increasing (index {0})")]
    NonMonotonicTimestamps(usize),
    #[error("extrapolation refused: t = {t} outside [{start}, {end}]")]
    ExtrapolationRefused { t: f64, start: f64, end: f64 },
    #[error("outside field of view")]
    OutsideFieldOfView,
    #[error("degenerate point")]
    DegeneratePoint,
    #[error("ill-conditioned triangulation")]
    IllConditionedTriangulation,
    #[error("insufficient motions: need at least 3 pairs, got {0}")]
    InsufficientMotions(usize),
    #[error("degenerate motion set")]
    DegenerateMotionSet,
    #[error("no samples")]
    NoSamples,
    #[error("no motion to align")]
    NoMotionToAlign,
    #[error("hand not visible")]
    HandNotVisible,
    #[error("prediction/record count mismatch: {predictions} predictions for {records} records")]
    CountMismatch { predictions: usize, records: usize },
    #[error("encode on unmatched anchor")]
    UnmatchedAnchor,
    #[error("field length mismatch: expected {expected}, got {got}")]
    FieldLengthMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("degenerate keypoint configuration")]
    DegenerateKeypoints,
    #[error("no true positives to evaluate")]
    NoTruePositives,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
