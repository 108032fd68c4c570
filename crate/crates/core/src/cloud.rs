use alloc::vec::Vec;

use nalgebra::{Isometry3, Point3};

use crate::camera::CameraModel;
use crate::error::{Error, Result};

/// Coordinate frame a [`PointCloud`] is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Frame {
    Camera,
    World,
}

/// Ordered set of 3D points in millimeters with optional per-point RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    frame: Frame,
    points: Vec<Point3<f64>>,
    colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn empty(frame: Frame) -> Self {
        Self { frame, points: Vec::new(), colors: None }
    }

    pub fn new(frame: Frame, points: Vec<Point3<f64>>) -> Result<Self> {
        check_finite(&points)?;
        Ok(Self { frame, points, colors: None })
    }

    pub fn with_colors(frame: Frame, points: Vec<Point3<f64>>, colors: Vec<[u8; 3]>) -> Result<Self> {
        check_finite(&points)?;
        if colors.len() != points.len() {
            return Err(Error::InvalidInput(alloc::format!(
                "{} colors for {} points",
                colors.len(),
                points.len()
            )));
        }
        Ok(Self { frame, points, colors: Some(colors) })
    }

    /// Caller guarantees finiteness (and matching color length).
    pub(crate) fn from_parts(frame: Frame, points: Vec<Point3<f64>>, colors: Option<Vec<[u8; 3]>>) -> Self {
        debug_assert!(colors.as_ref().map_or(true, |c| c.len() == points.len()));
        Self { frame, points, colors }
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn colors(&self) -> Option<&[[u8; 3]]> {
        self.colors.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Point3<f64>> {
        self.points.iter()
    }

    pub fn expect_frame(&self, frame: Frame) -> Result<()> {
        if self.frame == frame {
            Ok(())
        } else {
            Err(Error::FrameMismatch { expected: frame, actual: self.frame })
        }
    }

    /// Sub-cloud with the given point indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let points = indices.iter().map(|&i| self.points[i]).collect();
        let colors = self.colors.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect());
        Self { frame: self.frame, points, colors }
    }

    /// Applies a rigid transform and retags the frame.
    pub fn transformed(&self, iso: &Isometry3<f64>, frame: Frame) -> Self {
        Self {
            frame,
            points: self.points.iter().map(|p| iso.transform_point(p)).collect(),
            colors: self.colors.clone(),
        }
    }

    /// World-frame copy (no-op clone for world-frame clouds).
    pub fn to_world(&self, camera: &CameraModel) -> Self {
        match self.frame {
            Frame::World => self.clone(),
            Frame::Camera => self.transformed(camera.extrinsic(), Frame::World),
        }
    }

    /// Camera-frame copy (no-op clone for camera-frame clouds).
    pub fn to_camera(&self, camera: &CameraModel) -> Self {
        match self.frame {
            Frame::Camera => self.clone(),
            Frame::World => self.transformed(&camera.extrinsic().inverse(), Frame::Camera),
        }
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        crate::linalg::centroid(&self.points)
    }
}

fn check_finite(points: &[Point3<f64>]) -> Result<()> {
    match points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
        Some(i) => Err(Error::InvalidInput(alloc::format!("point {i} is not finite"))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_non_finite_points() {
        let pts = vec![Point3::new(0.0, 0.0, 1.0), Point3::new(f64::NAN, 0.0, 1.0)];
        assert!(PointCloud::new(Frame::Camera, pts).is_err());
    }

    #[test]
    fn frame_check() {
        let c = PointCloud::empty(Frame::World);
        assert!(c.expect_frame(Frame::World).is_ok());
        assert_eq!(
            c.expect_frame(Frame::Camera),
            Err(Error::FrameMismatch { expected: Frame::Camera, actual: Frame::World })
        );
    }

    #[test]
    fn select_keeps_colors_aligned() {
        let pts = vec![Point3::new(0.0, 0.0, 1.0), Point3::new(1.0, 0.0, 1.0), Point3::new(2.0, 0.0, 1.0)];
        let c = PointCloud::with_colors(Frame::Camera, pts, vec![[1, 1, 1], [2, 2, 2], [3, 3, 3]]).unwrap();
        let s = c.select(&[2, 0]);
        assert_eq!(s.points()[0].x, 2.0);
        assert_eq!(s.colors().unwrap(), &[[3, 3, 3], [1, 1, 1]]);
    }
}
