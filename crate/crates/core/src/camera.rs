//! Pinhole camera with a rigid camera-to-world extrinsic.
//!
//! Camera frame convention: +x right, +y down, +z along the optical axis.
//! Integer pixel coordinates address pixel centers, so pixel `(u, v)` covers
//! `[u - 0.5, u + 0.5) x [v - 0.5, v + 0.5)` in the image plane.

use alloc::format;

use nalgebra::{Isometry3, Matrix3, Point2, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

const ROTATION_TOL: f64 = 1e-9;

/// Pinhole intrinsics, no distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for Intrinsics {
    /// 640x480 with a focal length typical of structured-light/stereo RGBD
    /// sensors.
    fn default() -> Self {
        Self { fx: 570.0, fy: 570.0, cx: 320.0, cy: 240.0, width: 640, height: 480 }
    }
}

impl Intrinsics {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidCamera("non-finite intrinsics".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidCamera(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera("image size must be non-zero".into()));
        }
        if !(0.0..f64::from(self.width)).contains(&self.cx)
            || !(0.0..f64::from(self.height)).contains(&self.cy)
        {
            return Err(Error::InvalidCamera(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Intrinsics plus the camera pose in the world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    intrinsics: Intrinsics,
    /// camera -> world
    extrinsic: Isometry3<f64>,
}

impl CameraModel {
    pub fn new(intrinsics: Intrinsics, extrinsic: Isometry3<f64>) -> Result<Self> {
        intrinsics.validate()?;
        if !extrinsic.translation.vector.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidCamera("non-finite translation".into()));
        }
        check_rotation(&extrinsic.rotation.to_rotation_matrix().into_inner())?;
        Ok(Self { intrinsics, extrinsic })
    }

    /// Builds the extrinsic from a row-major-as-given rotation matrix and a
    /// translation, validating orthonormality and `det = +1` to 1e-9.
    pub fn from_rotation(
        intrinsics: Intrinsics,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        check_rotation(&rotation)?;
        let rot = Rotation3::from_matrix_unchecked(rotation);
        let extrinsic =
            Isometry3::from_parts(Translation3::from(translation), UnitQuaternion::from_rotation_matrix(&rot));
        intrinsics.validate()?;
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidCamera("non-finite translation".into()));
        }
        Ok(Self { intrinsics, extrinsic })
    }

    /// Camera at `eye` with its optical axis through `target`; image "up"
    /// (-y) is as close to `up` as possible.
    pub fn look_at(
        intrinsics: Intrinsics,
        eye: Point3<f64>,
        target: Point3<f64>,
        up: Vector3<f64>,
    ) -> Result<Self> {
        let forward = target - eye;
        if forward.norm() == 0.0 {
            return Err(Error::InvalidCamera("eye and target coincide".into()));
        }
        let z = forward.normalize();
        let x = z.cross(&up);
        if x.norm() < 1e-12 {
            return Err(Error::InvalidCamera("up vector parallel to viewing direction".into()));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_columns(&[x, y, z]);
        Self::from_rotation(intrinsics, rotation, eye.coords)
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn width(&self) -> u32 {
        self.intrinsics.width
    }

    pub fn height(&self) -> u32 {
        self.intrinsics.height
    }

    pub fn extrinsic(&self) -> &Isometry3<f64> {
        &self.extrinsic
    }

    /// Rotation part of the camera->world transform as a matrix.
    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.extrinsic.rotation.to_rotation_matrix().into_inner()
    }

    /// Camera center in world coordinates.
    pub fn origin(&self) -> Point3<f64> {
        Point3::from(self.extrinsic.translation.vector)
    }

    pub fn to_world(&self, p: &Point3<f64>) -> Point3<f64> {
        self.extrinsic.transform_point(p)
    }

    pub fn to_camera(&self, p: &Point3<f64>) -> Point3<f64> {
        self.extrinsic.inverse_transform_point(p)
    }

    /// World +z expressed in the camera frame.
    pub fn world_up_in_camera(&self) -> Vector3<f64> {
        self.extrinsic.inverse_transform_vector(&Vector3::z())
    }

    /// `true` if the pixel coordinate lies on the image.
    pub fn contains_pixel(&self, pixel: &Point2<f64>) -> bool {
        let w = f64::from(self.intrinsics.width);
        let h = f64::from(self.intrinsics.height);
        pixel.x >= -0.5 && pixel.x < w - 0.5 && pixel.y >= -0.5 && pixel.y < h - 0.5
    }

    /// Projects a camera-frame point; `None` behind or on the camera plane.
    #[inline]
    pub fn project(&self, p: &Point3<f64>) -> Option<Point2<f64>> {
        if p.z <= 0.0 {
            return None;
        }
        let k = &self.intrinsics;
        Some(Point2::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
    }

    /// Ray through a pixel, scaled so that its z component is 1.
    #[inline]
    pub fn ray(&self, pixel: &Point2<f64>) -> Vector3<f64> {
        let k = &self.intrinsics;
        Vector3::new((pixel.x - k.cx) / k.fx, (pixel.y - k.cy) / k.fy, 1.0)
    }

    /// Camera-frame point at the given depth (z, mm) along a pixel's ray.
    pub fn backproject(&self, pixel: &Point2<f64>, depth: f64) -> Result<Point3<f64>> {
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(Error::InvalidInput(format!("depth must be positive, got {depth}")));
        }
        if !self.contains_pixel(pixel) {
            return Err(Error::InvalidInput(format!(
                "pixel ({}, {}) outside the image",
                pixel.x, pixel.y
            )));
        }
        Ok(Point3::from(self.ray(pixel) * depth))
    }

    /// Same intrinsics, different pose.
    pub fn with_extrinsic(&self, extrinsic: Isometry3<f64>) -> Result<Self> {
        Self::new(self.intrinsics, extrinsic)
    }
}

fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidCamera("non-finite rotation".into()));
    }
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    if ortho > ROTATION_TOL {
        return Err(Error::InvalidCamera(format!(
            "rotation is not orthonormal (max |R^T R - I| = {ortho:e})"
        )));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ROTATION_TOL {
        return Err(Error::InvalidCamera(format!("rotation determinant is {det}, expected +1")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam500() -> CameraModel {
        let k = Intrinsics { fx: 500.0, fy: 500.0, cx: 320.0, cy: 240.0, width: 640, height: 480 };
        CameraModel::new(k, Isometry3::identity()).unwrap()
    }

    #[test]
    fn principal_point_maps_to_optical_axis() {
        let p = cam500().backproject(&Point2::new(320.0, 240.0), 1000.0).unwrap();
        assert_eq!(p, Point3::new(0.0, 0.0, 1000.0));
    }

    #[test]
    fn offset_pixel_backprojects_linearly() {
        let p = cam500().backproject(&Point2::new(420.0, 240.0), 500.0).unwrap();
        assert_eq!(p, Point3::new(100.0, 0.0, 500.0));
    }

    #[test]
    fn rejects_non_positive_depth() {
        let cam = cam500();
        assert!(matches!(cam.backproject(&Point2::new(1.0, 1.0), 0.0), Err(Error::InvalidInput(_))));
        assert!(matches!(cam.backproject(&Point2::new(1.0, 1.0), -3.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_bad_intrinsics_and_rotation() {
        let mut k = Intrinsics::default();
        k.fx = 0.0;
        assert!(CameraModel::new(k, Isometry3::identity()).is_err());
        let mut k = Intrinsics::default();
        k.cx = 640.0;
        assert!(CameraModel::new(k, Isometry3::identity()).is_err());

        let mut r = Matrix3::identity();
        r[(0, 0)] = -1.0; // reflection
        assert!(CameraModel::from_rotation(Intrinsics::default(), r, Vector3::zeros()).is_err());
        r[(0, 0)] = 1.0 + 1e-6;
        assert!(CameraModel::from_rotation(Intrinsics::default(), r, Vector3::zeros()).is_err());
    }

    #[test]
    fn look_at_points_optical_axis_at_target() {
        let cam = CameraModel::look_at(
            Intrinsics::default(),
            Point3::new(0.0, -500.0, -300.0),
            Point3::new(10.0, 0.0, 20.0),
            Vector3::z(),
        )
        .unwrap();
        let target_cam = cam.to_camera(&Point3::new(10.0, 0.0, 20.0));
        assert!(target_cam.x.abs() < 1e-9 && target_cam.y.abs() < 1e-9 && target_cam.z > 0.0);
        // world up appears towards the top of the image (-y)
        assert!(cam.world_up_in_camera().y < 0.0);
    }
}
