use alloc::string::String;

use nalgebra::{Matrix3, Point3, Rotation3, Unit, Vector3};

use crate::camera::CameraModel;
use crate::cloud::{Frame, PointCloud};
use crate::cluster::euclidean_cluster_indices;
use crate::error::{Error, Result};
use crate::linalg::{angle_between_deg, orthonormal_completion};

use super::axis::{normals_axis, pca_axis};
use super::direction::disambiguate_direction;
use super::normals::estimate_normals;
use super::refine::{beyond, fit_cylinder_trimmed};
use super::tip::{locate_tip_with, TipConfig, TipFit};

/// Axis estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    #[default]
    Pca,
    Normals,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pca => "pca",
            Method::Normals => "normals",
        }
    }
}

impl core::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(Method::Pca),
            "normals" => Ok(Method::Normals),
            other => Err(Error::InvalidParameter(alloc::format!("unknown method {other:?}"))),
        }
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PoseConfig {
    /// Fewer supporting points than this is an error.
    pub min_points: usize,
    pub cluster_tolerance_mm: f64,
    /// Neighborhood size of the normals method.
    pub normals_k: usize,
    pub tip: TipConfig,
    /// Refine the method's axis with a cylinder fit of the teat body.
    pub refine_axis: bool,
}

impl Default for PoseConfig {
    fn default() -> Self {
        Self { min_points: 30, cluster_tolerance_mm: 10.0, normals_k: 12, tip: TipConfig::default(), refine_axis: true }
    }
}

impl PoseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_points < 3 {
            return Err(Error::InvalidParameter("min_points must be >= 3".into()));
        }
        if !(self.cluster_tolerance_mm > 0.0) || !self.cluster_tolerance_mm.is_finite() {
            return Err(Error::InvalidParameter("cluster_tolerance_mm must be > 0".into()));
        }
        if self.normals_k < 3 {
            return Err(Error::InvalidParameter("normals_k must be >= 3".into()));
        }
        if !(0.0..=1.0).contains(&self.tip.percentile) || !(self.tip.slab_mm >= 0.0) {
            return Err(Error::InvalidParameter("tip percentile must be in [0, 1] and slab_mm >= 0".into()));
        }
        Ok(())
    }
}

/// Tip position and approach axis of one teat, world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TeatPose {
    pub teat_id: String,
    pub stamp_us: u64,
    pub tip_mm: Point3<f64>,
    /// Unit vector from the tip toward the udder. The cup faces `-axis` and
    /// moves along `+axis` onto the tip.
    pub axis: Unit<Vector3<f64>>,
    pub method: Method,
    pub n_points: usize,
}

impl TeatPose {
    /// Full rotation whose z column is the cup direction `-axis`.
    /// Roll about the axis carries no information; x and y are the
    /// deterministic completion of [`orthonormal_completion`].
    pub fn orientation(&self) -> Rotation3<f64> {
        let z = -self.axis;
        let (x, y) = orthonormal_completion(&z);
        Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x.into_inner(), y.into_inner(), z.into_inner()]))
    }

    pub fn with_label(mut self, teat_id: impl Into<String>, stamp_us: u64) -> Self {
        self.teat_id = teat_id.into();
        self.stamp_us = stamp_us;
        self
    }
}

/// Pose of the teat in `points` (camera or world frame; the result is in
/// world frame). Uses the largest Euclidean cluster, the chosen axis
/// method, [`disambiguate_direction`] and the tip locator. The returned
/// pose has an empty `teat_id` and stamp 0, see [`TeatPose::with_label`].
pub fn estimate_teat_pose(
    points: &PointCloud,
    camera: &CameraModel,
    method: Method,
    config: &PoseConfig,
) -> Result<TeatPose> {
    config.validate()?;
    if points.len() < config.min_points {
        return Err(Error::InsufficientPoints { required: config.min_points, actual: points.len() });
    }
    let world = match points.frame() {
        Frame::World => points.clone(),
        Frame::Camera => points.to_world(camera),
    };
    let clusters = euclidean_cluster_indices(&world, config.cluster_tolerance_mm, 1, usize::MAX)?;
    let largest = clusters.first().map_or(0, |c| c.len());
    if largest < config.min_points {
        return Err(Error::InsufficientPoints { required: config.min_points, actual: largest });
    }
    let teat = world.select(&clusters[0]);

    let raw = match method {
        Method::Pca => pca_axis(&teat)?,
        Method::Normals => normals_axis(&estimate_normals(&teat, config.normals_k, &camera.origin())?)?,
    };
    let mut axis = disambiguate_direction(&raw, &teat, camera);
    let mut fit = locate_tip_with(teat.points(), &axis, &config.tip).expect("non-empty cluster");
    if config.refine_axis {
        (axis, fit) = refine(teat.points(), axis, fit, &config.tip);
    }

    Ok(TeatPose { teat_id: String::new(), stamp_us: 0, tip_mm: fit.tip, axis, method, n_points: teat.len() })
}

/// Largest deviation accepted from the unrefined axis, degrees.
const MAX_REFINE_DEG: f64 = 30.0;
/// Gap kept between the cap and the body points, mm.
const CAP_MARGIN_MM: f64 = 1.0;
const MIN_BODY_POINTS: usize = 12;

/// Alternates a trimmed cylinder fit of the body (points more than one
/// radius above the tip, so the cap is excluded) with the tip fit. Keeps
/// the sign of `axis` and falls back to it when the fit fails or drifts
/// away.
fn refine(points: &[Point3<f64>], axis: Unit<Vector3<f64>>, fit: TipFit, tip: &TipConfig) -> (Unit<Vector3<f64>>, TipFit) {
    let (initial, mut axis, mut fit) = (axis, axis, fit);
    for _ in 0..4 {
        let Some(r) = fit.radius else { break };
        let body = beyond(points, &axis, &fit.tip, r + CAP_MARGIN_MM);
        if body.len() < MIN_BODY_POINTS {
            break;
        }
        let Some(cyl) = fit_cylinder_trimmed(&body, &axis, &fit.line_point, r) else { break };
        let next = if cyl.axis.dot(&axis) < 0.0 { -cyl.axis } else { cyl.axis };
        if angle_between_deg(&next, &initial) > MAX_REFINE_DEG {
            break;
        }
        let Some(next_fit) = locate_tip_with(points, &next, tip) else { break };
        let moved = angle_between_deg(&next, &axis);
        axis = next;
        fit = next_fit;
        if moved < 1e-6 {
            break;
        }
    }
    (axis, fit)
}
