//! Carving the points of one teat out of the scene cloud with its mask.

use alloc::vec::Vec;

use nalgebra::Vector3;

use crate::camera::CameraModel;
use crate::cloud::{Frame, PointCloud};
use crate::error::{Error, Result};
use crate::mask::TeatMask;

/// Indices of the camera-frame points whose projection falls inside the
/// mask contour subsampled at `stride` (even-odd rule, see
/// [`ImagePolygon::contains`](crate::ImagePolygon::contains)).
pub fn extract_masked_indices(
    cloud: &PointCloud,
    mask: &TeatMask,
    camera: &CameraModel,
    stride: usize,
) -> Result<Vec<usize>> {
    cloud.expect_frame(Frame::Camera)?;
    let poly = mask.polygon(stride)?;
    let (lo, hi) = poly.bounds();
    let mut keep = Vec::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let Some(px) = camera.project(p) else { continue };
        if px.x < lo.x || px.x > hi.x || px.y < lo.y || px.y > hi.y {
            continue;
        }
        if poly.contains(&px) {
            keep.push(i);
        }
    }
    Ok(keep)
}

/// Points of `cloud` (camera frame) inside the frustum of a mask contour.
/// `stride` 1 uses every contour vertex; larger strides trade precision
/// for speed.
pub fn extract_masked_points(
    cloud: &PointCloud,
    mask: &TeatMask,
    camera: &CameraModel,
    stride: usize,
) -> Result<PointCloud> {
    let idx = extract_masked_indices(cloud, mask, camera, stride)?;
    Ok(cloud.select(&idx))
}

/// Half-space frustum test for convex contours: one plane through the
/// camera center and each pair of consecutive contour rays. Returns the
/// same points as [`extract_masked_points`] for points off the contour
/// boundary; errors with [`Error::NonConvexMask`] otherwise.
pub fn extract_with_frustum(
    cloud: &PointCloud,
    mask: &TeatMask,
    camera: &CameraModel,
    stride: usize,
) -> Result<PointCloud> {
    cloud.expect_frame(Frame::Camera)?;
    let poly = mask.polygon(stride)?;
    if !poly.is_convex() {
        return Err(Error::NonConvexMask { stride });
    }
    let rays: Vec<Vector3<f64>> = poly.vertices().iter().map(|v| camera.ray(v)).collect();
    let n = rays.len();
    // clockwise in image coordinates -> inward normals are ray_i x ray_{i+1}
    let orientation = if poly.signed_area() > 0.0 { 1.0 } else { -1.0 };
    let planes: Vec<Vector3<f64>> =
        (0..n).map(|i| rays[i].cross(&rays[(i + 1) % n]) * orientation).collect();

    let keep: Vec<usize> = cloud
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.z > 0.0 && planes.iter().all(|nrm| nrm.dot(&p.coords) > 0.0))
        .map(|(i, _)| i)
        .collect();
    Ok(cloud.select(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Intrinsics;
    use alloc::vec;
    use nalgebra::{Isometry3, Point2, Point3};

    fn camera() -> CameraModel {
        CameraModel::new(Intrinsics::default(), Isometry3::identity()).unwrap()
    }

    fn grid_cloud(cam: &CameraModel) -> PointCloud {
        let mut pts = Vec::new();
        for v in (0..480).step_by(7) {
            for u in (0..640).step_by(9) {
                pts.push(cam.backproject(&Point2::new(f64::from(u), f64::from(v)), 800.0 + f64::from(u)).unwrap());
            }
        }
        PointCloud::new(Frame::Camera, pts).unwrap()
    }

    #[test]
    fn full_image_contour_keeps_everything() {
        let cam = camera();
        let cloud = grid_cloud(&cam);
        let mask = TeatMask::new("all", 0, vec![[0, 0], [640, 0], [640, 480], [0, 480]], 640, 480).unwrap();
        assert_eq!(extract_masked_points(&cloud, &mask, &cam, 1).unwrap().len(), cloud.len());
    }

    #[test]
    fn disjoint_contour_keeps_nothing() {
        let cam = camera();
        let cloud = PointCloud::new(Frame::Camera, vec![Point3::new(0.0, 0.0, 500.0)]).unwrap();
        let mask = TeatMask::new("corner", 0, vec![[0, 0], [10, 0], [10, 10], [0, 10]], 640, 480).unwrap();
        assert!(extract_masked_points(&cloud, &mask, &cam, 1).unwrap().is_empty());
    }

    #[test]
    fn rejects_world_frame_cloud() {
        let cam = camera();
        let cloud = PointCloud::new(Frame::World, vec![Point3::new(0.0, 0.0, 500.0)]).unwrap();
        let mask = TeatMask::new("m", 0, vec![[0, 0], [10, 0], [10, 10]], 640, 480).unwrap();
        assert!(matches!(
            extract_masked_points(&cloud, &mask, &cam, 1),
            Err(Error::FrameMismatch { .. })
        ));
    }

    #[test]
    fn frustum_matches_polygon_on_convex_contour() {
        let cam = camera();
        let cloud = grid_cloud(&cam);
        let mask = TeatMask::new("hex", 0, vec![[200, 100], [300, 90], [380, 200], [330, 330], [210, 300], [170, 200]], 640, 480)
            .unwrap();
        let a = extract_masked_points(&cloud, &mask, &cam, 1).unwrap();
        let b = extract_with_frustum(&cloud, &mask, &cam, 1).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn frustum_rejects_concave_contour() {
        let cam = camera();
        let cloud = grid_cloud(&cam);
        let l = TeatMask::new("l", 0, vec![[0, 0], [40, 0], [40, 20], [20, 20], [20, 40], [0, 40]], 640, 480).unwrap();
        assert_eq!(extract_with_frustum(&cloud, &l, &cam, 1), Err(Error::NonConvexMask { stride: 1 }));
    }
}
