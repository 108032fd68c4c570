//! Teat axis, tip and cup-approach pose from the 3D points of one teat.
//!
//! Two axis estimators are provided. [`pca_axis`] treats the teat as an
//! elongated cylinder whose largest principal component is its axis.
//! [`normals_axis`] uses the fact that cylinder surface normals are
//! orthogonal to the axis and returns the direction minimizing the sum of
//! squared projections onto the normals. Both are sign-ambiguous;
//! [`disambiguate_direction`] orients the axis from tip toward udder.

mod axis;
mod direction;
mod estimate;
mod normals;
mod refine;
mod tip;

pub use axis::{pca_axis, normals_axis, AMBIGUITY_RATIO};
pub use direction::{disambiguate_direction, NEAR_HORIZONTAL_DOT};
pub use estimate::{estimate_teat_pose, Method, PoseConfig, TeatPose};
pub use normals::{estimate_normals, SurfaceNormalField};
pub use refine::{fit_cylinder, CylinderFit};
pub use tip::{locate_tip, locate_tip_with, TipConfig, TipFit};
