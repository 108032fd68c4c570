use nalgebra::{Point3, Unit, Vector3};

use crate::camera::CameraModel;
use crate::cloud::{Frame, PointCloud};

/// Below this `|dot(axis, up)|` a teat counts as near-horizontal and the
/// camera-distance fallback decides the sign.
pub const NEAR_HORIZONTAL_DOT: f64 = 0.1;

/// Orients a sign-ambiguous teat axis from tip toward udder.
///
/// The returned axis has a positive component along world up (world +z,
/// expressed in the points' frame). For near-horizontal teats
/// (`|dot| < 0.1`) the axial extreme closest to the camera is taken as the
/// tip and the axis points away from it.
pub fn disambiguate_direction(
    axis: &Unit<Vector3<f64>>,
    points: &PointCloud,
    camera: &CameraModel,
) -> Unit<Vector3<f64>> {
    let (up, eye) = match points.frame() {
        Frame::World => (Vector3::z(), camera.origin()),
        Frame::Camera => (camera.world_up_in_camera(), Point3::origin()),
    };
    let d = axis.dot(&up);
    if d.abs() >= NEAR_HORIZONTAL_DOT {
        return if d > 0.0 { *axis } else { -*axis };
    }

    let mut lo: Option<(f64, Point3<f64>)> = None;
    let mut hi: Option<(f64, Point3<f64>)> = None;
    for p in points.iter() {
        let s = p.coords.dot(axis);
        if lo.map_or(true, |(v, _)| s < v) {
            lo = Some((s, *p));
        }
        if hi.map_or(true, |(v, _)| s > v) {
            hi = Some((s, *p));
        }
    }
    match (lo, hi) {
        (Some((_, low)), Some((_, high))) => {
            // the low end is the tip when it is the one nearer the camera
            if (low - eye).norm_squared() <= (high - eye).norm_squared() {
                *axis
            } else {
                -*axis
            }
        }
        _ => {
            if d >= 0.0 {
                *axis
            } else {
                -*axis
            }
        }
    }
}
