//! Parametric udder scenes with exact ground truth.
//!
//! A scene is an axis-aligned ellipsoid udder with up to six capped
//! cylinder teats, a camera and a depth noise model. [`render`] ray casts
//! it into a camera-frame point cloud, oracle teat masks (standing in for
//! a segmentation network) and the ground-truth tips and axes.

mod contour;
mod occlude;
mod raycast;
mod render;
mod scene;
mod target;

pub use contour::{trace_outer_contour, PixelSet};
pub use occlude::{occlude, occlude_with, rasterize};
pub use raycast::{hit_ellipsoid, hit_teat, Ray};
pub use render::{
    masks_from_labels, render, render_frame, teat_label, GroundTruth, LabelImage, Rendered, TeatTruth, LABEL_BACKGROUND,
    LABEL_UDDER, MIN_MASK_PIXELS,
};
pub use scene::{
    default_camera, Ellipsoid, NoiseModel, Occluder, SceneSpec, TeatSpec, MAX_TEATS, WORKING_DISTANCE_MM,
};
pub use target::{
    fit_error_curve, plane_target_measure, plane_target_stats, render_plane_target, CurveFit, PlaneTarget, TargetStats,
    CURVE_DISTANCES_MM, MIN_TARGET_POINTS,
};
