//! Depth error against distance for a flat target, per noise preset, with
//! the quadratic fit `error(d) = a + b d^2`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use teatpose_core::synth::{
    fit_error_curve, plane_target_stats, render_plane_target, CurveFit, NoiseModel, PlaneTarget, CURVE_DISTANCES_MM,
};
use teatpose_core::Intrinsics;

use crate::error::{Error, IoContext, Result};
use crate::formats::NoiseJson;
use crate::report::{fmt_f64, fmt_opt, line_chart_svg, Series, Table};
use crate::{derive_seed, STREAM_TARGET};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePreset {
    pub name: String,
    pub noise: NoiseJson,
}

/// Contents of a presets file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub presets: Vec<CurvePreset>,
    #[serde(default = "default_distances")]
    pub distances_mm: Vec<f64>,
}

fn default_distances() -> Vec<f64> {
    CURVE_DISTANCES_MM.to_vec()
}

impl Default for CurveConfig {
    fn default() -> Self {
        let preset = |name: &str| CurvePreset { name: name.into(), noise: NoiseJson::Preset(name.into()) };
        Self { presets: vec![preset("zero"), preset("orbbec-like"), preset("a1b3")], distances_mm: default_distances() }
    }
}

/// One target measurement. `None` fields mark a distance with too few
/// target points.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub preset: String,
    pub distance_mm: f64,
    pub n_points: usize,
    pub measured_mm: Option<f64>,
    /// Per-point RMS depth error; the fitted quantity.
    pub rms_error_mm: Option<f64>,
    /// Noise model sigma at this distance.
    pub model_sigma_mm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetFit {
    pub preset: String,
    pub model: NoiseModel,
    pub fit: Option<CurveFit>,
    pub fit_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveReport {
    pub rows: Vec<CurveRow>,
    pub fits: Vec<PresetFit>,
    pub warnings: Vec<String>,
}

pub fn run_camera_curve(cfg: &CurveConfig, master_seed: u64) -> Result<CurveReport> {
    let mut distinct = cfg.distances_mm.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Config(format!("need >= 3 distinct distances, got {}", distinct.len())));
    }
    if cfg.presets.is_empty() {
        return Err(Error::Config("no presets".into()));
    }
    let intr = Intrinsics::default();
    let mut report = CurveReport { rows: Vec::new(), fits: Vec::new(), warnings: Vec::new() };
    for (p, preset) in cfg.presets.iter().enumerate() {
        let model = preset.noise.resolve()?;
        let mut samples = Vec::new();
        for (i, &d) in cfg.distances_mm.iter().enumerate() {
            let target = PlaneTarget::new(d);
            let seed = derive_seed(master_seed, STREAM_TARGET, (p * 1000 + i) as u64);
            let cloud = render_plane_target(&target, &intr, &model, seed)?;
            let mut row = CurveRow {
                preset: preset.name.clone(),
                distance_mm: d,
                n_points: cloud.len(),
                measured_mm: None,
                rms_error_mm: None,
                model_sigma_mm: model.sigma_at(d),
            };
            match plane_target_stats(&cloud, &target) {
                Ok(st) => {
                    row.n_points = st.n_points;
                    row.measured_mm = Some(st.mean_mm);
                    row.rms_error_mm = Some(st.rms_error_mm);
                    samples.push((d, st.rms_error_mm));
                }
                Err(e) => report.warnings.push(format!("{} at {d} mm: {e}, excluded from fit", preset.name)),
            }
            report.rows.push(row);
        }
        let fit = match fit_error_curve(&samples) {
            Ok(f) => Some(f),
            Err(e) => {
                report.warnings.push(format!("{}: {e}", preset.name));
                None
            }
        };
        report.fits.push(PresetFit { preset: preset.name.clone(), model, fit, fit_points: samples.len() });
    }
    Ok(report)
}

impl CurveReport {
    pub fn rows_table(&self) -> Table {
        let mut t = Table::new(&["preset", "distance_mm", "n_points", "measured_mm", "rms_error_mm", "model_sigma_mm"]);
        for r in &self.rows {
            t.push(vec![
                r.preset.clone(),
                fmt_f64(r.distance_mm),
                r.n_points.to_string(),
                fmt_opt(r.measured_mm),
                fmt_opt(r.rms_error_mm),
                fmt_f64(r.model_sigma_mm),
            ]);
        }
        t
    }

    pub fn fit_table(&self) -> Table {
        let mut t = Table::new(&["preset", "fit_points", "a_mm", "b_mm_per_m2", "max_error_1m_mm", "model_a", "model_b"]);
        for f in &self.fits {
            t.push(vec![
                f.preset.clone(),
                f.fit_points.to_string(),
                fmt_opt(f.fit.map(|c| c.a)),
                fmt_opt(f.fit.map(|c| c.b)),
                fmt_opt(f.fit.map(|c| c.max_error_1m)),
                fmt_f64(f.model.a),
                fmt_f64(f.model.b),
            ]);
        }
        t
    }

    pub fn svg(&self) -> String {
        let mut owned: Vec<(String, Vec<(f64, f64)>, Vec<(f64, f64)>)> = Vec::new();
        for f in &self.fits {
            let pts: Vec<(f64, f64)> = self
                .rows
                .iter()
                .filter(|r| r.preset == f.preset)
                .filter_map(|r| r.rms_error_mm.map(|e| (r.distance_mm, e)))
                .collect();
            let max_d = pts.iter().map(|p| p.0).fold(0.0, f64::max);
            let curve = f
                .fit
                .map(|c| (0..=50).map(|i| f64::from(i) / 50.0 * max_d).map(|d| (d, c.predict(d))).collect())
                .unwrap_or_default();
            owned.push((f.preset.clone(), pts, curve));
        }
        let series: Vec<Series<'_>> =
            owned.iter().map(|(n, p, c)| Series { name: n, points: p, curve: c }).collect();
        line_chart_svg("Depth error against distance", "distance (mm)", "RMS depth error (mm)", &series)
    }

    /// Writes `curve.csv`, `fit.csv` and `curve.svg` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).at(dir)?;
        self.rows_table().write(&dir.join("curve.csv"))?;
        self.fit_table().write(&dir.join("fit.csv"))?;
        let path = dir.join("curve.svg");
        fs::write(&path, self.svg()).at(&path)
    }
}
