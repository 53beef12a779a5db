use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate depth: point lies on the camera plane (z = {0:e})")]
    DegenerateDepth(f64),

    #[error("invalid rotation: {0}")]
    InvalidRotation(String),

    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("trajectory too short: need at least {min} points, got {got}")]
    TrajectoryTooShort { min: usize, got: usize },

    #[error("no segments")]
    NoSegments,

    #[error("no visible anchors at conditioning frame")]
    NoVisibleAnchors,

    #[error("window underrun: visibility series has {len} entries, window needs {window}")]
    WindowUnderrun { len: usize, window: usize },

    #[error("no dynamic regions above {threshold} px")]
    NoDynamicRegions { threshold: f64 },

    #[error("degenerate weights: every track has zero displacement")]
    DegenerateWeights,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("length mismatch: estimated trajectory has {est} poses, ground truth has {gt}")]
    LengthMismatch { est: usize, gt: usize },

    #[error("scale undefined: estimated positions are all coincident")]
    ZeroVariance,

    #[error("manifest validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateDepth(_) => "degenerate_depth",
            Error::InvalidRotation(_) => "invalid_rotation",
            Error::InvalidIntrinsics(_) => "invalid_intrinsics",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::TrajectoryTooShort { .. } => "trajectory_too_short",
            Error::NoSegments => "no_segments",
            Error::NoVisibleAnchors => "no_visible_anchors",
            Error::WindowUnderrun { .. } => "window_underrun",
            Error::NoDynamicRegions { .. } => "no_dynamic_regions",
            Error::DegenerateWeights => "degenerate_weights",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::ZeroVariance => "zero_variance",
            Error::Validation(_) => "validation",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
