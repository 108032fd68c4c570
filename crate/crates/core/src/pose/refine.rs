//! Least-squares cylinder fit used to refine a teat axis.

use alloc::vec::Vec;

use nalgebra::{Point3, SMatrix, SVector, Unit, Vector3};

use crate::linalg::{orthonormal_completion, outlier_cutoff};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderFit {
    pub axis: Unit<Vector3<f64>>,
    /// A point on the axis line.
    pub point: Point3<f64>,
    pub radius: f64,
    /// Root mean square radial residual, mm.
    pub rms: f64,
}

const MAX_ITER: usize = 30;

/// Gauss-Newton fit of `|(p - c) x a| = r` over the axis direction, the
/// axis position and the radius, started from the given guess. `None` when
/// fewer than 6 points are given or the normal equations are singular.
pub fn fit_cylinder(
    points: &[Point3<f64>],
    axis: &Unit<Vector3<f64>>,
    point: &Point3<f64>,
    radius: f64,
) -> Option<CylinderFit> {
    if points.len() < 6 || !(radius > 0.0) {
        return None;
    }
    let mut a = *axis;
    let mut c = *point;
    let mut r = radius;
    let mut lambda = 1e-3;
    let mut cost = cost_of(points, &a, &c, r);
    for _ in 0..MAX_ITER {
        let (e1, e2) = orthonormal_completion(&a);
        let mut jtj = SMatrix::<f64, 5, 5>::zeros();
        let mut jtr = SVector::<f64, 5>::zeros();
        for p in points {
            let d = p - c;
            let along = d.dot(&a);
            let w = d - a.as_ref() * along;
            let rho = w.norm();
            if rho < 1e-12 {
                continue;
            }
            let n = w / rho;
            let row = SVector::<f64, 5>::new(
                -along * n.dot(&e1),
                -along * n.dot(&e2),
                -n.dot(&e1),
                -n.dot(&e2),
                -1.0,
            );
            jtj += row * row.transpose();
            jtr += row * (rho - r);
        }
        let mut improved = false;
        for _ in 0..8 {
            let mut damped = jtj;
            for i in 0..5 {
                damped[(i, i)] *= 1.0 + lambda;
            }
            let step = damped.lu().solve(&(-jtr))?;
            let a_new = Unit::new_normalize(a.as_ref() + e1.as_ref() * step[0] + e2.as_ref() * step[1]);
            let c_new = c + e1.as_ref() * step[2] + e2.as_ref() * step[3];
            let r_new = r + step[4];
            let cost_new = cost_of(points, &a_new, &c_new, r_new);
            if r_new > 0.0 && cost_new <= cost {
                let converged = step.norm() < 1e-10 || cost - cost_new <= 1e-14 * cost.max(1e-300);
                a = a_new;
                c = c_new;
                r = r_new;
                cost = cost_new;
                lambda = (lambda * 0.3).max(1e-12);
                improved = !converged;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    // report the axis point nearest the centroid of the data
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let point = c + a.as_ref() * (Point3::from(mean) - c).dot(&a);
    Some(CylinderFit { axis: a, point, radius: r, rms: libm::sqrt(cost / n) })
}

fn cost_of(points: &[Point3<f64>], a: &Unit<Vector3<f64>>, c: &Point3<f64>, r: f64) -> f64 {
    points
        .iter()
        .map(|p| {
            let d = p - c;
            let e = (d - a.as_ref() * d.dot(a)).norm() - r;
            e * e
        })
        .sum()
}

/// Points off the surface by less than this are never trimmed, mm.
const TRIM_FLOOR_MM: f64 = 1.0;

/// [`fit_cylinder`], refit up to three times without the outliers of the
/// previous fit.
pub(crate) fn fit_cylinder_trimmed(
    points: &[Point3<f64>],
    axis: &Unit<Vector3<f64>>,
    point: &Point3<f64>,
    radius: f64,
) -> Option<CylinderFit> {
    let mut fit = fit_cylinder(points, axis, point, radius)?;
    let mut kept = points.len();
    for _ in 0..3 {
        let res: Vec<f64> = points.iter().map(|p| radial_distance(p, &fit) - fit.radius).collect();
        let cut = outlier_cutoff(&res, TRIM_FLOOR_MM);
        let inliers: Vec<Point3<f64>> =
            points.iter().zip(&res).filter(|(_, e)| e.abs() <= cut).map(|(p, _)| *p).collect();
        if inliers.len() == kept || inliers.len() < 6 {
            break;
        }
        let Some(refit) = fit_cylinder(&inliers, &fit.axis, &fit.point, fit.radius) else { break };
        fit = refit;
        kept = inliers.len();
    }
    Some(fit)
}

fn radial_distance(p: &Point3<f64>, fit: &CylinderFit) -> f64 {
    let d = p - fit.point;
    (d - fit.axis.as_ref() * d.dot(&fit.axis)).norm()
}

/// Points whose axial coordinate relative to `origin` exceeds `min_s`.
pub(crate) fn beyond(points: &[Point3<f64>], axis: &Unit<Vector3<f64>>, origin: &Point3<f64>, min_s: f64) -> Vec<Point3<f64>> {
    points.iter().filter(|p| (*p - origin).dot(axis) > min_s).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::angle_between_axes_deg;

    #[test]
    fn recovers_half_cylinder_from_tilted_guess() {
        let axis = Unit::new_normalize(Vector3::new(0.1, -0.2, 1.0));
        let (e1, e2) = orthonormal_completion(&axis);
        let base = Point3::new(5.0, -3.0, 40.0);
        let mut pts = Vec::new();
        for i in 0..12 {
            for j in 0..=10 {
                let th = core::f64::consts::PI * f64::from(j) / 10.0;
                let h = f64::from(i) * 2.5;
                pts.push(base + axis.as_ref() * h + (e1.as_ref() * libm::cos(th) + e2.as_ref() * libm::sin(th)) * 14.0);
            }
        }
        let guess = Unit::new_normalize(axis.as_ref() + Vector3::new(0.2, 0.1, 0.0));
        let fit = fit_cylinder(&pts, &guess, &(base + e2.as_ref() * 3.0), 10.0).unwrap();
        assert!(angle_between_axes_deg(&fit.axis, &axis) < 1e-6);
        assert!((fit.radius - 14.0).abs() < 1e-6);
        assert!(fit.rms < 1e-6);
    }

    #[test]
    fn trimming_ignores_a_stray_cluster() {
        let axis = Unit::new_normalize(Vector3::z());
        let (e1, e2) = orthonormal_completion(&axis);
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..=8 {
                let th = core::f64::consts::PI * f64::from(j) / 8.0;
                pts.push(Point3::new(0.0, 0.0, f64::from(i) * 3.0) + (e1.as_ref() * libm::cos(th) + e2.as_ref() * libm::sin(th)) * 14.0);
            }
        }
        for k in 0..5 {
            pts.push(Point3::new(30.0 + f64::from(k), 10.0, 27.0));
        }
        let plain = fit_cylinder(&pts, &axis, &Point3::origin(), 14.0).unwrap();
        let robust = fit_cylinder_trimmed(&pts, &axis, &Point3::origin(), 14.0).unwrap();
        assert!((plain.radius - 14.0).abs() > 0.5);
        assert!((robust.radius - 14.0).abs() < 1e-6, "{}", robust.radius);
    }
}
