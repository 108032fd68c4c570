use alloc::vec::Vec;

use nalgebra::{Point3, Unit, Vector3};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::linalg::{covariance, sym_eigen};

/// Per-point unit surface normals, each oriented towards the camera.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceNormalField {
    normals: Vec<Unit<Vector3<f64>>>,
    k: usize,
}

impl SurfaceNormalField {
    pub fn from_normals(normals: Vec<Unit<Vector3<f64>>>, k: usize) -> Self {
        Self { normals, k }
    }

    pub fn normals(&self) -> &[Unit<Vector3<f64>>] {
        &self.normals
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Field restricted to the given point indices.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self { normals: indices.iter().map(|&i| self.normals[i]).collect(), k: self.k }
    }
}

/// Normal of each point from the covariance of its `k` nearest neighbors
/// (the point itself included): the smallest-eigenvalue eigenvector,
/// flipped so that `dot(n, camera_origin - p) >= 0`.
///
/// `camera_origin` must be expressed in the same frame as `points`.
/// Neighbor ties are broken by point index.
pub fn estimate_normals(points: &PointCloud, k: usize, camera_origin: &Point3<f64>) -> Result<SurfaceNormalField> {
    let pts = points.points();
    if k < 3 {
        return Err(Error::InvalidParameter(alloc::format!("normal neighborhood k must be >= 3, got {k}")));
    }
    if k > pts.len() {
        return Err(Error::InvalidParameter(alloc::format!(
            "normal neighborhood k = {k} exceeds point count {}",
            pts.len()
        )));
    }

    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(pts.len());
    let mut hood: Vec<Point3<f64>> = Vec::with_capacity(k);
    let mut normals = Vec::with_capacity(pts.len());
    for p in pts {
        dist.clear();
        dist.extend(pts.iter().enumerate().map(|(j, q)| ((q - p).norm_squared(), j)));
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
        }
        hood.clear();
        hood.extend(dist[..k].iter().map(|&(_, j)| pts[j]));
        let (_, cov) = covariance(hood.iter()).expect("k >= 3");
        let n = sym_eigen(&cov).vectors[0];
        let n = if n.dot(&(camera_origin - p)) < 0.0 { -n } else { n };
        normals.push(Unit::new_normalize(n));
    }
    Ok(SurfaceNormalField { normals, k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Frame;

    fn plane() -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push(Point3::new(f64::from(i) * 3.0, f64::from(j) * 3.0 + f64::from(i) * 0.1, 0.0));
            }
        }
        PointCloud::new(Frame::World, pts).unwrap()
    }

    #[test]
    fn plane_normals_face_camera() {
        let f = estimate_normals(&plane(), 8, &Point3::new(0.0, 0.0, -500.0)).unwrap();
        for n in f.normals() {
            assert!((n.into_inner() - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn flipping_camera_flips_normals() {
        let a = estimate_normals(&plane(), 8, &Point3::new(0.0, 0.0, -500.0)).unwrap();
        let b = estimate_normals(&plane(), 8, &Point3::new(0.0, 0.0, 500.0)).unwrap();
        for (na, nb) in a.normals().iter().zip(b.normals()) {
            assert!((na.into_inner() + nb.into_inner()).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_k() {
        let c = plane();
        assert!(matches!(estimate_normals(&c, 101, &Point3::origin()), Err(Error::InvalidParameter(_))));
        assert!(matches!(estimate_normals(&c, 2, &Point3::origin()), Err(Error::InvalidParameter(_))));
    }
}
