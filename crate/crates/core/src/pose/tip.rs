//! Tip localization along an oriented teat axis.
//!
//! The axial extreme is taken robustly as a low percentile of the point
//! positions along the axis. The teat is then modeled as a cylinder with a
//! hemispherical cap: a circle fit of the body cross-section gives the axis
//! line and radius, and the points near the extreme give the cap center
//! (`s + sqrt(r^2 - rho^2)` per point, median). The tip is the cap apex on
//! the fitted axis line. When the body fit is not usable the tip falls back
//! to the centroid of the points within `slab_mm` of the percentile
//! position, moved onto the line through the cluster centroid.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Point3, Unit, Vector3};

use crate::cloud::PointCloud;
use crate::linalg::{centroid, median, orthonormal_completion, outlier_cutoff, percentile_sorted};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TipConfig {
    /// Axial percentile used as the robust minimum, in `[0, 1]`.
    pub percentile: f64,
    /// Half-width of the axial slab around the robust minimum, mm.
    pub slab_mm: f64,
    /// Fit the cylinder + hemispherical cap model when possible.
    pub cap_model: bool,
}

impl Default for TipConfig {
    fn default() -> Self {
        Self { percentile: 0.02, slab_mm: 5.0, cap_model: true }
    }
}

/// Tip estimate plus the axis-line fit it was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipFit {
    pub tip: Point3<f64>,
    /// A point on the fitted axis line.
    pub line_point: Point3<f64>,
    /// Fitted teat radius when the cap model was used.
    pub radius: Option<f64>,
}

/// Tip with the default [`TipConfig`]. `axis` must point from tip toward the
/// teat base. `None` for an empty point set.
pub fn locate_tip(points: &PointCloud, axis: &Unit<Vector3<f64>>) -> Option<Point3<f64>> {
    locate_tip_with(points.points(), axis, &TipConfig::default()).map(|f| f.tip)
}

pub fn locate_tip_with(points: &[Point3<f64>], axis: &Unit<Vector3<f64>>, config: &TipConfig) -> Option<TipFit> {
    let c = centroid(points)?;
    let a = axis.as_ref();
    let s: Vec<f64> = points.iter().map(|p| (p - c).dot(a)).collect();
    let mut sorted = s.clone();
    sorted.sort_by(f64::total_cmp);
    let s_lo = percentile_sorted(&sorted, config.percentile);

    let slab: Vec<usize> = (0..points.len()).filter(|&i| (s[i] - s_lo).abs() <= config.slab_mm).collect();

    if config.cap_model {
        if let Some(fit) = cap_model_tip(points, &s, s_lo, &slab, &c, axis, config) {
            return Some(fit);
        }
    }

    let mean_s = slab.iter().map(|&i| s[i]).sum::<f64>() / slab.len() as f64;
    Some(TipFit { tip: c + a * mean_s, line_point: c, radius: None })
}

const MIN_BODY_POINTS: usize = 6;
/// Body points are taken up to this many radii above the apex.
const BODY_WINDOW: f64 = 2.5;
/// Axial extent of the first body pass above the slab, mm.
const FIRST_WINDOW_MM: f64 = 25.0;

fn cap_model_tip(
    points: &[Point3<f64>],
    s: &[f64],
    s_lo: f64,
    slab: &[usize],
    c: &Point3<f64>,
    axis: &Unit<Vector3<f64>>,
    config: &TipConfig,
) -> Option<TipFit> {
    let a = axis.as_ref();
    let (e1, e2) = orthonormal_completion(axis);
    let cross = |p: &Point3<f64>| -> (f64, f64) {
        let d = p - c;
        (d.dot(&e1), d.dot(&e2))
    };

    // first pass: everything above the slab; second pass drops the cap and
    // anything past BODY_WINDOW radii, where the udder starts
    let mut body: Vec<(f64, f64)> =
        (0..points.len())
            .filter(|&i| s[i] > s_lo + config.slab_mm && s[i] < s_lo + config.slab_mm + FIRST_WINDOW_MM)
            .map(|i| cross(&points[i]))
            .collect();
    let mut circle;
    (circle, body) = fit_circle_trimmed(&body)?;
    let (lo, hi) = (s_lo + circle.2, s_lo + BODY_WINDOW * circle.2);
    let trimmed: Vec<(f64, f64)> =
        (0..points.len()).filter(|&i| s[i] > lo && s[i] < hi).map(|i| cross(&points[i])).collect();
    if let Some((refit, kept)) = fit_circle_trimmed(&trimmed) {
        circle = refit;
        body = kept;
    }
    let (cx, cy, r) = circle;
    if !plausible_circle(&body, cx, cy, r) {
        return None;
    }

    let line_point = c + e1.as_ref() * cx + e2.as_ref() * cy;
    let mut centers: Vec<f64> = slab
        .iter()
        .filter_map(|&i| {
            let d = points[i] - line_point;
            let along = d.dot(a);
            let rho2 = (d - a * along).norm_squared();
            (rho2 < r * r).then(|| along + libm::sqrt(r * r - rho2))
        })
        .collect();
    let apex = match median(&mut centers) {
        Some(center) => center - r,
        None => s_lo,
    };
    Some(TipFit { tip: line_point + a * apex, line_point, radius: Some(r) })
}

/// Points off the circle by less than this are never trimmed, mm.
const TRIM_FLOOR_MM: f64 = 1.0;

/// [`fit_circle`], refit up to three times without the outliers of the
/// previous fit. Returns the circle and the points it was fitted to.
fn fit_circle_trimmed(pts: &[(f64, f64)]) -> Option<((f64, f64, f64), Vec<(f64, f64)>)> {
    let mut circle = fit_circle(pts)?;
    let mut kept = pts.to_vec();
    for _ in 0..3 {
        let (cx, cy, r) = circle;
        let res: Vec<f64> = pts.iter().map(|&(x, y)| libm::hypot(x - cx, y - cy) - r).collect();
        let cut = outlier_cutoff(&res, TRIM_FLOOR_MM);
        let next: Vec<(f64, f64)> = pts.iter().zip(&res).filter(|(_, e)| e.abs() <= cut).map(|(p, _)| *p).collect();
        if next.len() == kept.len() || next.len() < MIN_BODY_POINTS {
            break;
        }
        let Some(refit) = fit_circle(&next) else { break };
        circle = refit;
        kept = next;
    }
    Some((circle, kept))
}

/// Algebraic (Kasa) circle fit, returns `(cx, cy, r)`.
fn fit_circle(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if pts.len() < MIN_BODY_POINTS {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x, sy + y));
    let (mx, my) = (mx / n, my / n);
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for &(x, y) in pts {
        let (x, y) = (x - mx, y - my);
        let row = Vector3::new(x, y, 1.0);
        ata += row * row.transpose();
        atb += row * -(x * x + y * y);
    }
    let sol = ata.lu().solve(&atb)?;
    let (d, e, f) = (sol[0], sol[1], sol[2]);
    let (cx, cy) = (-d / 2.0, -e / 2.0);
    let r2 = cx * cx + cy * cy - f;
    if !(r2 > 0.0) || !r2.is_finite() {
        return None;
    }
    Some((cx + mx, cy + my, libm::sqrt(r2)))
}

/// Rejects fits from points that barely curve (tiny arcs) or scatter far
/// from the circle.
fn plausible_circle(pts: &[(f64, f64)], cx: f64, cy: f64, r: f64) -> bool {
    let n = pts.len() as f64;
    let rms = libm::sqrt(
        pts.iter()
            .map(|&(x, y)| {
                let d = libm::hypot(x - cx, y - cy) - r;
                d * d
            })
            .sum::<f64>()
            / n,
    );
    if rms > 0.25 * r {
        return false;
    }
    // angular coverage around the fitted center
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(sx, sy), &(x, y)| {
        let h = libm::hypot(x - cx, y - cy);
        (sx + (x - cx) / h, sy + (y - cy) / h)
    });
    let mean_dir = libm::atan2(sy, sx);
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for &(x, y) in pts {
        let mut d = libm::atan2(y - cy, x - cx) - mean_dir;
        while d > core::f64::consts::PI {
            d -= 2.0 * core::f64::consts::PI;
        }
        while d < -core::f64::consts::PI {
            d += 2.0 * core::f64::consts::PI;
        }
        lo = lo.min(d);
        hi = hi.max(d);
    }
    hi - lo >= 45f64.to_radians()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_point_is_its_own_tip() {
        let p = Point3::new(3.0, -4.0, 12.5);
        let axis = Unit::new_normalize(Vector3::new(0.2, 0.3, 1.0));
        let one = PointCloud::new(crate::Frame::World, vec![p]).unwrap();
        assert_eq!(locate_tip(&one, &axis), Some(p));
        assert_eq!(locate_tip(&PointCloud::empty(crate::Frame::World), &axis), None);
    }

    #[test]
    fn fallback_uses_slab_centroid_on_axis_line() {
        let pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 0.0, 2.0), Point3::new(0.0, 0.0, 50.0)];
        let cfg = TipConfig { cap_model: false, ..TipConfig::default() };
        let fit = locate_tip_with(&pts, &Unit::new_normalize(Vector3::z()), &cfg).unwrap();
        assert!((fit.tip - Point3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn circle_fit_recovers_half_arc() {
        let pts: Vec<(f64, f64)> = (0..=20)
            .map(|i| {
                let t = f64::from(i) / 20.0 * core::f64::consts::PI;
                (4.0 + 14.0 * libm::cos(t), -2.0 + 14.0 * libm::sin(t))
            })
            .collect();
        let (cx, cy, r) = fit_circle(&pts).unwrap();
        assert!((cx - 4.0).abs() < 1e-9 && (cy + 2.0).abs() < 1e-9 && (r - 14.0).abs() < 1e-9);
        assert!(plausible_circle(&pts, cx, cy, r));
    }
}
