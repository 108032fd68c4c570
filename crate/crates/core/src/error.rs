use alloc::string::String;

use crate::cloud::Frame;

/// Errors produced by the geometry, pose and scene code.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid camera model: {0}")]
    InvalidCamera(String),

    #[error("point cloud is in the {actual:?} frame, expected {expected:?}")]
    FrameMismatch { expected: Frame, actual: Frame },

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("mask contour is degenerate after stride-{stride} subsampling")]
    EmptyMask { stride: usize },

    #[error("mask is not convex after stride-{stride} subsampling")]
    NonConvexMask { stride: usize },

    #[error("insufficient points: need at least {required}, got {actual}")]
    InsufficientPoints { required: usize, actual: usize },

    #[error("ambiguous axis: eigenvalue ratio {ratio:.4} below threshold")]
    AmbiguousAxis { ratio: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("mask stamp {mask_us} does not match cloud stamp {cloud_us}")]
    StampMismatch { cloud_us: u64, mask_us: u64 },

    #[error("error curve fit: {0}")]
    Fit(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
