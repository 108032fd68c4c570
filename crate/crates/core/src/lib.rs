//! Teat pose estimation from 2D segmentation masks and RGBD point clouds.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure
//! computation: file formats, threads and the command line live in the
//! `teatpose` companion crate.
//!
//! The geometry path for one frame is
//!
//! 1. [`extract_masked_points`]: keep the cloud points whose pinhole
//!    projection falls inside a teat mask contour,
//! 2. [`voxel_downsample`]: one centroid per occupied voxel,
//! 3. [`estimate_teat_pose`]: largest [`euclidean_cluster`], axis by
//!    [`pca_axis`] or [`normals_axis`], sign fixed by
//!    [`disambiguate_direction`], tip by [`locate_tip`].
//!
//! [`synth`] renders parametric udder scenes with exact ground truth and
//! oracle masks, [`gate`] holds the arm-control consistency gate and
//! [`schedule`] the simulated-time latency model of the distributed
//! pipeline.
//!
//! Units are millimeters throughout. Point clouds carry an explicit
//! [`Frame`] tag (camera or world) and operations reject mismatches.

#![no_std]

extern crate alloc;

mod camera;
mod cloud;
mod cluster;
mod error;
mod extract;
pub mod frame;
pub mod gate;
mod linalg;
mod mask;
pub mod pose;
pub mod schedule;
pub mod synth;
mod voxel;

pub use camera::{CameraModel, Intrinsics};
pub use cloud::{Frame, PointCloud};
pub use cluster::{euclidean_cluster, euclidean_cluster_indices};
pub use error::{Error, Result};
pub use extract::{extract_masked_indices, extract_masked_points, extract_with_frustum};
pub use linalg::{angle_between_axes_deg, orthonormal_completion};
pub use mask::{contour_is_simple, ImagePolygon, TeatMask};
pub use pose::{
    disambiguate_direction, estimate_normals, estimate_teat_pose, locate_tip, normals_axis,
    pca_axis, Method, PoseConfig, SurfaceNormalField, TeatPose, TipConfig,
};
pub use voxel::{voxel_downsample, VoxelGrid};

pub use nalgebra::{Isometry3, Matrix3, Point2, Point3, Unit, UnitVector3, Vector3};
