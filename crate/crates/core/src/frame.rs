//! The per-frame geometry path: masks and a camera-frame cloud in, teat
//! poses out.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Point3;

use crate::camera::CameraModel;
use crate::cloud::{Frame, PointCloud};
use crate::error::{Error, Result};
use crate::extract::extract_masked_points;
use crate::mask::TeatMask;
use crate::pose::{estimate_teat_pose, Method, PoseConfig, TeatPose};
use crate::voxel::{voxel_downsample, VoxelGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct GeometryConfig {
    pub voxel_leaf_mm: f64,
    pub contour_stride: usize,
    pub method: Method,
    pub pose: PoseConfig,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { voxel_leaf_mm: 5.0, contour_stride: 1, method: Method::Pca, pose: PoseConfig::default() }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.contour_stride == 0 {
            return Err(Error::InvalidParameter("contour_stride must be >= 1".into()));
        }
        VoxelGrid::with_leaf(self.voxel_leaf_mm)?;
        self.pose.validate()
    }
}

/// A teat whose pose could not be estimated in this frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TeatFailure {
    pub teat_id: String,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameEstimate {
    pub stamp_us: u64,
    /// In mask order.
    pub poses: Vec<TeatPose>,
    pub failures: Vec<TeatFailure>,
}

/// Runs extraction, voxelization and pose estimation for every mask.
///
/// Fails as a whole only for invalid configuration, a cloud that is not in
/// camera frame, or a mask whose stamp differs from `stamp_us`. Per-teat
/// errors are collected in [`FrameEstimate::failures`].
pub fn estimate_frame(
    stamp_us: u64,
    cloud: &PointCloud,
    masks: &[TeatMask],
    camera: &CameraModel,
    config: &GeometryConfig,
) -> Result<FrameEstimate> {
    config.validate()?;
    cloud.expect_frame(Frame::Camera)?;
    if let Some(m) = masks.iter().find(|m| m.stamp_us() != stamp_us) {
        return Err(Error::StampMismatch { cloud_us: stamp_us, mask_us: m.stamp_us() });
    }
    let grid = VoxelGrid::new(config.voxel_leaf_mm, Point3::origin())?;
    let mut out = FrameEstimate { stamp_us, ..FrameEstimate::default() };
    for mask in masks {
        match estimate_one(cloud, mask, camera, &grid, config) {
            Ok(pose) => out.poses.push(pose.with_label(mask.teat_id(), stamp_us)),
            Err(error) => out.failures.push(TeatFailure { teat_id: mask.teat_id().into(), error }),
        }
    }
    Ok(out)
}

fn estimate_one(
    cloud: &PointCloud,
    mask: &TeatMask,
    camera: &CameraModel,
    grid: &VoxelGrid,
    config: &GeometryConfig,
) -> Result<TeatPose> {
    let teat = extract_masked_points(cloud, mask, camera, config.contour_stride)?;
    let teat = voxel_downsample(&teat, grid);
    estimate_teat_pose(&teat, camera, config.method, &config.pose)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Intrinsics;
    use alloc::vec;
    use nalgebra::Vector3;

    #[test]
    fn stamp_mismatch_is_rejected() {
        let cam = CameraModel::look_at(Intrinsics::default(), Point3::new(0.0, 0.0, -500.0), Point3::origin(), Vector3::y())
            .unwrap();
        let mask = TeatMask::new("a", 7, vec![[0, 0], [10, 0], [10, 10]], 640, 480).unwrap();
        let cloud = PointCloud::new(Frame::Camera, vec![Point3::new(0.0, 0.0, 100.0)]).unwrap();
        let err = estimate_frame(8, &cloud, &[mask], &cam, &GeometryConfig::default()).unwrap_err();
        assert_eq!(err, Error::StampMismatch { cloud_us: 8, mask_us: 7 });
    }

    #[test]
    fn per_teat_failure_does_not_abort() {
        let cam = CameraModel::look_at(Intrinsics::default(), Point3::new(0.0, 0.0, -500.0), Point3::origin(), Vector3::y())
            .unwrap();
        let masks = vec![
            TeatMask::new("a", 3, vec![[0, 0], [10, 0], [10, 10]], 640, 480).unwrap(),
            TeatMask::new("b", 3, vec![[20, 20], [30, 20], [30, 30]], 640, 480).unwrap(),
        ];
        let cloud = PointCloud::new(Frame::Camera, vec![Point3::new(0.0, 0.0, 100.0)]).unwrap();
        let est = estimate_frame(3, &cloud, &masks, &cam, &GeometryConfig::default()).unwrap();
        assert!(est.poses.is_empty());
        assert_eq!(est.failures.len(), 2);
        assert_eq!(est.failures[1].teat_id, "b");
    }
}
