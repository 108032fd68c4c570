use nalgebra::{Matrix3, Unit, Vector3};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::linalg::{covariance, sym_eigen};

use super::normals::SurfaceNormalField;

/// Minimum ratio between the two relevant eigenvalues for an axis to be
/// considered well defined.
pub const AMBIGUITY_RATIO: f64 = 1.05;

/// Largest principal component of the points (sign unspecified).
///
/// Fails with [`Error::InsufficientPoints`] below three points and with
/// [`Error::AmbiguousAxis`] when the two largest covariance eigenvalues are
/// within [`AMBIGUITY_RATIO`] of each other.
pub fn pca_axis(points: &PointCloud) -> Result<Unit<Vector3<f64>>> {
    if points.len() < 3 {
        return Err(Error::InsufficientPoints { required: 3, actual: points.len() });
    }
    let (_, cov) = covariance(points.points()).expect("non-empty");
    let eig = sym_eigen(&cov);
    let [_, mid, max] = eig.values;
    if !(max > 0.0) {
        return Err(Error::AmbiguousAxis { ratio: 1.0 });
    }
    if mid > 0.0 && max / mid < AMBIGUITY_RATIO {
        return Err(Error::AmbiguousAxis { ratio: max / mid });
    }
    Ok(Unit::new_unchecked(eig.vectors[2]))
}

/// Direction `a` minimizing `sum_i (n_i . a)^2` over unit vectors: the
/// smallest-eigenvalue eigenvector of `sum_i n_i n_i^T` (sign unspecified).
///
/// Ambiguous when the two smallest eigenvalues are within
/// [`AMBIGUITY_RATIO`] of each other, which includes the all-parallel case.
pub fn normals_axis(field: &SurfaceNormalField) -> Result<Unit<Vector3<f64>>> {
    let normals = field.normals();
    if normals.len() < 3 {
        return Err(Error::InsufficientPoints { required: 3, actual: normals.len() });
    }
    let scatter = normals.iter().fold(Matrix3::zeros(), |acc, n| acc + n.as_ref() * n.transpose());
    let eig = sym_eigen(&scatter);
    let [min, mid, max] = eig.values;
    let floor = 1e-12 * max;
    if mid <= AMBIGUITY_RATIO * min.max(0.0) + floor {
        let ratio = if min > 0.0 { mid / min } else { 1.0 };
        return Err(Error::AmbiguousAxis { ratio });
    }
    Ok(Unit::new_unchecked(eig.vectors[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Frame;
    use alloc::vec;
    use alloc::vec::Vec;
    use nalgebra::Point3;

    #[test]
    fn collinear_segment() {
        let pts: Vec<_> = (0..=10).map(|i| Point3::new(0.0, 0.0, f64::from(i) * 10.0)).collect();
        let a = pca_axis(&PointCloud::new(Frame::World, pts).unwrap()).unwrap();
        assert!((a.z.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let c = PointCloud::new(Frame::World, vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)]).unwrap();
        assert_eq!(pca_axis(&c), Err(Error::InsufficientPoints { required: 3, actual: 2 }));
    }

    #[test]
    fn isotropic_blob_is_ambiguous() {
        let mut pts = Vec::new();
        for s in [-1.0, 1.0] {
            pts.push(Point3::new(s, 0.0, 0.0));
            pts.push(Point3::new(0.0, s, 0.0));
            pts.push(Point3::new(0.0, 0.0, s));
        }
        let c = PointCloud::new(Frame::World, pts).unwrap();
        assert!(matches!(pca_axis(&c), Err(Error::AmbiguousAxis { .. })));
    }

    #[test]
    fn orthogonal_normals_give_their_complement() {
        let f = SurfaceNormalField::from_normals(
            vec![Unit::new_normalize(Vector3::x()), Unit::new_normalize(Vector3::y()), Unit::new_normalize(Vector3::x())],
            3,
        );
        let a = normals_axis(&f).unwrap();
        assert!((a.z.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parallel_normals_are_ambiguous() {
        let n = Unit::new_normalize(Vector3::new(1.0, 2.0, 3.0));
        let f = SurfaceNormalField::from_normals(vec![n; 5], 3);
        assert!(matches!(normals_axis(&f), Err(Error::AmbiguousAxis { .. })));
    }
}
