//! Flat distance target for characterizing depth noise against range.

use alloc::vec::Vec;

use nalgebra::Point3;

use crate::camera::Intrinsics;
use crate::cloud::{Frame, PointCloud};
use crate::error::{Error, Result};

use super::render::{row_rng, sensor_point};
use super::scene::NoiseModel;

/// Rectangle facing the camera on its optical axis, `distance_mm` away.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneTarget {
    pub distance_mm: f64,
    pub width_mm: f64,
    pub height_mm: f64,
}

/// Fewer target points than this cannot be measured.
pub const MIN_TARGET_POINTS: usize = 100;

/// Target distances of the camera-curve experiment, mm.
pub const CURVE_DISTANCES_MM: [f64; 7] = [200.0, 400.0, 600.0, 800.0, 1000.0, 1200.0, 1400.0];

impl PlaneTarget {
    pub fn new(distance_mm: f64) -> Self {
        Self { distance_mm, width_mm: 100.0, height_mm: 150.0 }
    }

    fn covers(&self, x: f64, y: f64) -> bool {
        x.abs() <= self.width_mm / 2.0 && y.abs() <= self.height_mm / 2.0
    }
}

/// Camera-frame cloud of the target alone, with per-row noise streams.
pub fn render_plane_target(target: &PlaneTarget, intr: &Intrinsics, noise: &NoiseModel, seed: u64) -> Result<PointCloud> {
    intr.validate()?;
    noise.validate()?;
    if !(target.distance_mm > 0.0) {
        return Err(Error::InvalidScene("target distance must be > 0".into()));
    }
    let d = target.distance_mm;
    let mut points = Vec::new();
    for v in 0..intr.height {
        let mut rng = row_rng(seed, v);
        let y = (f64::from(v) - intr.cy) / intr.fy * d;
        for u in 0..intr.width {
            let x = (f64::from(u) - intr.cx) / intr.fx * d;
            if target.covers(x, y) {
                points.extend(sensor_point(intr, noise, &mut rng, u, v, d));
            }
        }
    }
    PointCloud::new(Frame::Camera, points)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetStats {
    pub n_points: usize,
    /// Mean depth of the target points.
    pub mean_mm: f64,
    /// Root mean square of the per-point depth error.
    pub rms_error_mm: f64,
}

fn target_depths(cloud: &PointCloud, target: &PlaneTarget) -> Result<Vec<f64>> {
    cloud.expect_frame(Frame::Camera)?;
    let z: Vec<f64> = cloud.iter().filter(|p| target.covers(p.x, p.y)).map(|p: &Point3<f64>| p.z).collect();
    if z.len() < MIN_TARGET_POINTS {
        return Err(Error::InsufficientPoints { required: MIN_TARGET_POINTS, actual: z.len() });
    }
    Ok(z)
}

/// Measured target distance: mean depth of the points inside the target
/// rectangle.
pub fn plane_target_measure(cloud: &PointCloud, target: &PlaneTarget) -> Result<f64> {
    let z = target_depths(cloud, target)?;
    Ok(z.iter().sum::<f64>() / z.len() as f64)
}

pub fn plane_target_stats(cloud: &PointCloud, target: &PlaneTarget) -> Result<TargetStats> {
    let z = target_depths(cloud, target)?;
    let n = z.len() as f64;
    let mean_mm = z.iter().sum::<f64>() / n;
    let ms = z.iter().map(|v| (v - target.distance_mm) * (v - target.distance_mm)).sum::<f64>() / n;
    Ok(TargetStats { n_points: z.len(), mean_mm, rms_error_mm: libm::sqrt(ms) })
}

/// Fitted `error(d) = a + b d^2`, d in meters, errors in mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveFit {
    pub a: f64,
    pub b: f64,
    /// Largest predicted error over `0..=1 m`.
    pub max_error_1m: f64,
}

impl CurveFit {
    pub fn predict(&self, distance_mm: f64) -> f64 {
        let d = distance_mm / 1000.0;
        self.a + self.b * d * d
    }
}

/// Least-squares fit of `|error|` against `(1, d^2)` over
/// `(distance_mm, error_mm)` samples.
pub fn fit_error_curve(samples: &[(f64, f64)]) -> Result<CurveFit> {
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Fit(alloc::format!("need >= 3 distinct distances, got {}", distinct.len())));
    }
    if samples.iter().any(|s| !s.0.is_finite() || !s.1.is_finite()) {
        return Err(Error::Fit("non-finite sample".into()));
    }
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|s| (s.0 / 1000.0) * (s.0 / 1000.0)).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = samples.iter().map(|s| s.1.abs()).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, s) in xs.iter().zip(samples) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (s.1.abs() - y_mean);
    }
    let scale = xs.iter().map(|x| x * x).sum::<f64>();
    if !(sxx > 1e-12 * scale) {
        return Err(Error::Fit("rank-deficient design".into()));
    }
    let b = sxy / sxx;
    let a = y_mean - b * x_mean;
    Ok(CurveFit { a, b, max_error_1m: a.max(a + b) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_plane_measures_exactly() {
        let c = render_plane_target(&PlaneTarget::new(800.0), &Intrinsics::default(), &NoiseModel::zero(), 1).unwrap();
        assert!((plane_target_measure(&c, &PlaneTarget::new(800.0)).unwrap() - 800.0).abs() < 1e-9);
    }

    #[test]
    fn far_target_too_small() {
        let c = render_plane_target(&PlaneTarget::new(8000.0), &Intrinsics::default(), &NoiseModel::zero(), 1).unwrap();
        assert!(matches!(plane_target_measure(&c, &PlaneTarget::new(8000.0)), Err(Error::InsufficientPoints { .. })));
    }

    #[test]
    fn exact_curve_recovered() {
        let samples: Vec<_> = CURVE_DISTANCES_MM.iter().map(|&d| (d, 1.0 + 3.0 * (d / 1000.0) * (d / 1000.0))).collect();
        let f = fit_error_curve(&samples).unwrap();
        assert!((f.a - 1.0).abs() < 1e-9 && (f.b - 3.0).abs() < 1e-9);
        assert!((f.max_error_1m - 4.0).abs() < 1e-9);
    }

    #[test]
    fn zero_errors_fit_zero() {
        let samples: Vec<_> = CURVE_DISTANCES_MM.iter().map(|&d| (d, 0.0)).collect();
        let f = fit_error_curve(&samples).unwrap();
        assert_eq!((f.a, f.b), (0.0, 0.0));
    }

    #[test]
    fn degenerate_designs_rejected() {
        assert!(fit_error_curve(&[(100.0, 1.0), (200.0, 2.0), (100.0, 1.5)]).is_err());
        assert!(fit_error_curve(&[]).is_err());
    }
}
