//! Geometry-path timing per contour stride, and the pose change a stride
//! causes relative to stride 1.

use std::fs;
use std::path::Path;
use std::time::Instant;

use teatpose_core::frame::{estimate_frame, FrameEstimate, GeometryConfig};
use teatpose_core::schedule::LatencyModel;
use teatpose_core::synth::{render_frame, SceneSpec};
use teatpose_core::{angle_between_axes_deg, extract_masked_points};

use crate::error::{Error, IoContext, Result};
use crate::report::{fmt_f64, fmt_opt, mean_std, percentile, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct RateConfig {
    pub strides: Vec<usize>,
    /// Timed repetitions per stride.
    pub reps: usize,
    pub geometry: GeometryConfig,
    pub latency: LatencyModel,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            strides: vec![1, 2, 5, 10],
            reps: 20,
            geometry: GeometryConfig::default(),
            latency: LatencyModel::default(),
        }
    }
}

/// Deterministic part of a stride's result.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub stride: usize,
    /// Polygon vertices over all masks after subsampling.
    pub polygon_vertices: usize,
    pub poses: usize,
    /// Largest tip distance to the stride-1 pose of the same teat.
    pub max_tip_delta_mm: Option<f64>,
    pub max_axis_delta_deg: Option<f64>,
}

/// Wall-clock part, ms per frame (all masks).
#[derive(Debug, Clone, PartialEq)]
pub struct RateTiming {
    pub stride: usize,
    pub reps: usize,
    pub extract_mean_ms: f64,
    pub extract_p95_ms: f64,
    pub geometry_mean_ms: f64,
    pub geometry_p95_ms: f64,
    /// Simulated steady-state rate with geometry charged its measured mean.
    pub pipeline_fps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub contour_vertices: usize,
    pub budget_ms: f64,
    pub rows: Vec<RateRow>,
    pub timing: Vec<RateTiming>,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn deltas(base: &FrameEstimate, other: &FrameEstimate) -> (Option<f64>, Option<f64>) {
    let mut tip: Option<f64> = None;
    let mut axis: Option<f64> = None;
    for p in &other.poses {
        if let Some(b) = base.poses.iter().find(|b| b.teat_id == p.teat_id) {
            tip = Some(tip.unwrap_or(0.0).max((p.tip_mm - b.tip_mm).norm()));
            axis = Some(axis.unwrap_or(0.0).max(angle_between_axes_deg(&p.axis, &b.axis)));
        }
    }
    (tip, axis)
}

pub fn run_rate(scene: &SceneSpec, cfg: &RateConfig) -> Result<RateReport> {
    if cfg.strides.is_empty() || cfg.strides.contains(&0) {
        return Err(Error::Config("strides must be a non-empty list of positive integers".into()));
    }
    if cfg.reps == 0 {
        return Err(Error::Config("reps must be >= 1".into()));
    }
    cfg.latency.validate()?;
    let frame = render_frame(scene, 0)?;
    let camera = &scene.camera;
    let estimate = |stride: usize| {
        let g = GeometryConfig { contour_stride: stride, ..cfg.geometry };
        estimate_frame(0, &frame.cloud, &frame.masks, camera, &g)
    };
    let base = estimate(1)?;
    let contour_vertices = frame.masks.iter().map(|m| m.contour().len()).sum();

    let mut rows = Vec::new();
    let mut timing = Vec::new();
    for &stride in &cfg.strides {
        let g = GeometryConfig { contour_stride: stride, ..cfg.geometry };
        let polygon_vertices =
            frame.masks.iter().map(|m| m.polygon(stride).map_or(0, |p| p.len())).sum();
        let (mut extract_ms, mut geometry_ms) = (Vec::new(), Vec::new());
        let mut result = None;
        for _ in 0..cfg.reps {
            let t = Instant::now();
            for m in &frame.masks {
                // degenerate subsampled masks are reported by the full path below
                let _ = std::hint::black_box(extract_masked_points(&frame.cloud, m, camera, stride));
            }
            extract_ms.push(ms_since(t));
            let t = Instant::now();
            let r = estimate_frame(0, &frame.cloud, &frame.masks, camera, &g)?;
            geometry_ms.push(ms_since(t));
            result = Some(r);
        }
        let result = result.expect("reps >= 1");
        let (tip, axis) = deltas(&base, &result);
        rows.push(RateRow {
            stride,
            polygon_vertices,
            poses: result.poses.len(),
            max_tip_delta_mm: tip,
            max_axis_delta_deg: axis,
        });
        let geometry_mean = mean_std(&geometry_ms).map_or(0.0, |m| m.0);
        timing.push(RateTiming {
            stride,
            reps: cfg.reps,
            extract_mean_ms: mean_std(&extract_ms).map_or(0.0, |m| m.0),
            extract_p95_ms: percentile(&extract_ms, 95.0).unwrap_or(0.0),
            geometry_mean_ms: geometry_mean,
            geometry_p95_ms: percentile(&geometry_ms, 95.0).unwrap_or(0.0),
            pipeline_fps: cfg.latency.steady_state_fps(teatpose_core::schedule::ms_to_us(geometry_mean)),
        });
    }
    Ok(RateReport { contour_vertices, budget_ms: cfg.latency.geometry_budget_ms, rows, timing })
}

impl RateReport {
    pub fn rate_table(&self) -> Table {
        let mut t = Table::new(&[
            "stride",
            "contour_vertices",
            "polygon_vertices",
            "poses",
            "max_tip_delta_mm",
            "max_axis_delta_deg",
        ]);
        for r in &self.rows {
            t.push(vec![
                r.stride.to_string(),
                self.contour_vertices.to_string(),
                r.polygon_vertices.to_string(),
                r.poses.to_string(),
                fmt_opt(r.max_tip_delta_mm),
                fmt_opt(r.max_axis_delta_deg),
            ]);
        }
        t
    }

    pub fn timing_table(&self) -> Table {
        let mut t = Table::new(&[
            "stride",
            "reps",
            "extract_mean_ms",
            "extract_p95_ms",
            "geometry_mean_ms",
            "geometry_p95_ms",
            "budget_ms",
            "within_budget",
            "pipeline_fps",
        ]);
        for r in &self.timing {
            t.push(vec![
                r.stride.to_string(),
                r.reps.to_string(),
                fmt_f64(r.extract_mean_ms),
                fmt_f64(r.extract_p95_ms),
                fmt_f64(r.geometry_mean_ms),
                fmt_f64(r.geometry_p95_ms),
                fmt_f64(self.budget_ms),
                (r.geometry_mean_ms <= self.budget_ms).to_string(),
                fmt_f64(r.pipeline_fps),
            ]);
        }
        t
    }

    /// Writes `rate.csv` (deterministic) and `timing.csv` (wall clock).
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).at(dir)?;
        self.rate_table().write(&dir.join("rate.csv"))?;
        self.timing_table().write(&dir.join("timing.csv"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_one_against_itself_has_zero_delta() {
        let cfg = RateConfig { strides: vec![1, 1, 10], reps: 1, ..Default::default() };
        let r = run_rate(&SceneSpec::default_four_teat(), &cfg).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.rows[0].max_tip_delta_mm, Some(0.0));
        assert_eq!(r.rows[1].max_tip_delta_mm, Some(0.0));
        assert_eq!(r.rows[0].polygon_vertices, r.contour_vertices);
        let ratio = r.rows[2].polygon_vertices as f64 / r.contour_vertices as f64;
        assert!((ratio - 0.1).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn zero_stride_rejected() {
        let cfg = RateConfig { strides: vec![0], ..Default::default() };
        assert!(run_rate(&SceneSpec::default_four_teat(), &cfg).is_err());
    }
}
