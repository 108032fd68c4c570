//! Small dense helpers shared by the axis estimators.

use alloc::vec::Vec;
use nalgebra::{Matrix3, Point3, SymmetricEigen, Unit, Vector3};

pub(crate) fn centroid(points: &[Point3<f64>]) -> Option<Point3<f64>> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Some(Point3::from(sum / points.len() as f64))
}

/// Centroid and (biased, 1/n) covariance.
pub(crate) fn covariance<'a, I>(points: I) -> Option<(Point3<f64>, Matrix3<f64>)>
where
    I: IntoIterator<Item = &'a Point3<f64>>,
    I::IntoIter: Clone,
{
    let it = points.into_iter();
    let mut n = 0usize;
    let mut sum = Vector3::zeros();
    for p in it.clone() {
        sum += p.coords;
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let c = sum / n as f64;
    let mut cov = Matrix3::zeros();
    for p in it {
        let d = p.coords - c;
        cov += d * d.transpose();
    }
    Some((Point3::from(c), cov / n as f64))
}

/// Eigen-decomposition of a symmetric 3x3 matrix, eigenvalues ascending.
///
/// Each eigenvector is sign-normalized so that its largest-magnitude
/// component is positive, which makes results reproducible and invariant
/// to uniform scaling of the input.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Eigen3 {
    pub values: [f64; 3],
    pub vectors: [Vector3<f64>; 3],
}

pub(crate) fn sym_eigen(m: &Matrix3<f64>) -> Eigen3 {
    let eig = SymmetricEigen::new(*m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.map(|i| eig.eigenvalues[i]);
    let vectors = order.map(|i| canonical_sign(eig.eigenvectors.column(i).normalize()));
    Eigen3 { values, vectors }
}

fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    let i = v.iamax();
    if v[i] < 0.0 {
        -v
    } else {
        v
    }
}

/// Angle between two lines (sign-agnostic), degrees in `[0, 90]`.
pub fn angle_between_axes_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let cross = a.cross(b).norm();
    let dot = a.dot(b).abs();
    libm::atan2(cross, dot).to_degrees()
}

/// Angle between two directions, degrees in `[0, 180]`.
pub(crate) fn angle_between_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    libm::atan2(a.cross(b).norm(), a.dot(b)).to_degrees()
}

/// Two unit vectors completing `axis` to a right-handed orthonormal basis
/// `(e1, e2, axis)`. Deterministic: `e1` is built from the world basis
/// vector least aligned with `axis`.
pub fn orthonormal_completion(axis: &Unit<Vector3<f64>>) -> (Unit<Vector3<f64>>, Unit<Vector3<f64>>) {
    let a = axis.as_ref();
    let helper = match a.iamin() {
        0 => Vector3::x(),
        1 => Vector3::y(),
        _ => Vector3::z(),
    };
    let e1 = Unit::new_normalize(helper - a * a.dot(&helper));
    let e2 = Unit::new_normalize(a.cross(&e1));
    (e1, e2)
}

/// Linear interpolated percentile of an ascending-sorted slice, `q` in [0,1].
pub(crate) fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(percentile_sorted(values, 0.5))
}

/// Residual magnitude above which a point counts as an outlier: three
/// robust sigmas (1.4826 MAD), but at least `floor`.
pub(crate) fn outlier_cutoff(residuals: &[f64], floor: f64) -> f64 {
    let mut abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    let mad = median(&mut abs).unwrap_or(0.0);
    (3.0 * 1.4826 * mad).max(floor)
}
