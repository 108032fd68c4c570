//! Repeated estimation of a fixed scene under fresh noise and camera
//! perturbations, scored against the scene ground truth.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use teatpose_core::frame::{estimate_frame, GeometryConfig};
use teatpose_core::synth::{render_frame, SceneSpec};
use teatpose_core::{Point3, Vector3};

use crate::error::{Error, IoContext, Result};
use crate::pipeline::{OracleSegmenter, SegmentationRequest, Segmenter};
use crate::report::{fmt_f64, fmt_opt, histogram_svg, mean_std, percentile, Table};
use crate::{derive_seed, STREAM_CAMERA, STREAM_NOISE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepeatabilityConfig {
    pub cycles: usize,
    pub master_seed: u64,
    /// Per-axis uniform half-width of the camera position jitter, mm.
    pub eye_jitter_mm: f64,
    /// Per-axis uniform half-width of the view target jitter, mm.
    pub target_jitter_mm: f64,
    /// Tip errors below this count as successes.
    pub threshold_mm: f64,
    pub geometry: GeometryConfig,
}

impl Default for RepeatabilityConfig {
    fn default() -> Self {
        Self {
            cycles: 789,
            master_seed: 0,
            eye_jitter_mm: 20.0,
            target_jitter_mm: 10.0,
            threshold_mm: 5.0,
            geometry: GeometryConfig::default(),
        }
    }
}

/// Outcome for one teat in one cycle. Error fields are `None` when no pose
/// was produced; `status` then says why.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub cycle: usize,
    pub teat_id: String,
    pub noise_seed: u64,
    pub camera_seed: u64,
    pub status: String,
    pub tip_error_mm: Option<f64>,
    pub axis_error_deg: Option<f64>,
    pub n_points: Option<usize>,
    pub tip_mm: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeatSummary {
    pub teat_id: String,
    pub cycles: usize,
    pub estimates: usize,
    pub mean_tip_error_mm: Option<f64>,
    pub std_tip_error_mm: Option<f64>,
    /// RMS distance of the tip estimates from their mean.
    pub tip_spread_mm: Option<f64>,
    /// Fraction of cycles with tip error below the threshold; cycles
    /// without an estimate count as failures.
    pub success_rate: f64,
    pub mean_axis_error_deg: Option<f64>,
    pub std_axis_error_deg: Option<f64>,
}

/// Wall time of one stage over all cycles, ms.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTiming {
    pub stage: &'static str,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

#[derive(Debug, Clone)]
pub struct RepeatabilityReport {
    pub threshold_mm: f64,
    /// Ordered by cycle, then by teat in scene order.
    pub samples: Vec<Sample>,
    pub summary: Vec<TeatSummary>,
    pub timing: Vec<StageTiming>,
}

const OK: &str = "ok";
const NOT_VISIBLE: &str = "not visible";

struct Cycle {
    samples: Vec<Sample>,
    wall_ms: [f64; 3],
}

fn run_cycle(scene: &SceneSpec, cfg: &RepeatabilityConfig, cycle: usize) -> Result<Cycle> {
    let noise_seed = derive_seed(cfg.master_seed, STREAM_NOISE, cycle as u64);
    let camera_seed = derive_seed(cfg.master_seed, STREAM_CAMERA, cycle as u64);
    let mut scene = scene.clone().with_seed(noise_seed);
    if cfg.eye_jitter_mm > 0.0 || cfg.target_jitter_mm > 0.0 {
        scene = scene.with_perturbed_camera(camera_seed, cfg.eye_jitter_mm, cfg.target_jitter_mm)?;
    }
    let stamp = cycle as u64;

    let t0 = Instant::now();
    let rendered = std::sync::Arc::new(render_frame(&scene, stamp)?);
    let t1 = Instant::now();
    let request = SegmentationRequest { stamp_us: stamp, frame: rendered.clone(), occluders: scene.occluders.clone() };
    let masks = OracleSegmenter.segment(&request)?;
    let t2 = Instant::now();
    let estimate = estimate_frame(stamp, &rendered.cloud, &masks, &scene.camera, &cfg.geometry)?;
    let t3 = Instant::now();

    let samples = rendered
        .truth
        .teats
        .iter()
        .map(|truth| {
            let mut s = Sample {
                cycle,
                teat_id: truth.teat_id.clone(),
                noise_seed,
                camera_seed,
                status: NOT_VISIBLE.into(),
                tip_error_mm: None,
                axis_error_deg: None,
                n_points: None,
                tip_mm: None,
            };
            if let Some(p) = estimate.poses.iter().find(|p| p.teat_id == truth.teat_id) {
                s.status = OK.into();
                s.tip_error_mm = Some((p.tip_mm - truth.tip_mm).norm());
                s.axis_error_deg = Some(oriented(&p.axis, &truth.axis));
                s.n_points = Some(p.n_points);
                s.tip_mm = Some(p.tip_mm.coords.into());
            } else if let Some(f) = estimate.failures.iter().find(|f| f.teat_id == truth.teat_id) {
                s.status = f.error.to_string();
            }
            s
        })
        .collect();
    let ms = |a: Instant, b: Instant| (b - a).as_secs_f64() * 1e3;
    Ok(Cycle { samples, wall_ms: [ms(t0, t1), ms(t1, t2), ms(t2, t3)] })
}

/// Angle between directions, degrees; a flipped axis scores near 180.
fn oriented(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let c = (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

pub fn run_repeatability(scene: &SceneSpec, cfg: &RepeatabilityConfig) -> Result<RepeatabilityReport> {
    if cfg.cycles == 0 {
        return Err(Error::Config("cycles must be >= 1".into()));
    }
    cfg.geometry.validate()?;
    scene.validate()?;
    let cycles: Vec<Cycle> = (0..cfg.cycles).into_par_iter().map(|c| run_cycle(scene, cfg, c)).collect::<Result<_>>()?;

    let samples: Vec<Sample> = cycles.iter().flat_map(|c| c.samples.iter().cloned()).collect();
    let order: Vec<String> = scene.teats.iter().enumerate().map(|(k, _)| SceneSpec::teat_id(k)).collect();
    let summary = summarize(&samples, &order, cfg.cycles, cfg.threshold_mm);

    let stages = ["render", "segmentation", "geometry"];
    let timing = stages
        .iter()
        .enumerate()
        .map(|(i, &stage)| {
            let xs: Vec<f64> = cycles.iter().map(|c| c.wall_ms[i]).collect();
            StageTiming {
                stage,
                mean_ms: mean_std(&xs).map_or(0.0, |m| m.0),
                p50_ms: percentile(&xs, 50.0).unwrap_or(0.0),
                p95_ms: percentile(&xs, 95.0).unwrap_or(0.0),
                max_ms: percentile(&xs, 100.0).unwrap_or(0.0),
            }
        })
        .collect();
    Ok(RepeatabilityReport { threshold_mm: cfg.threshold_mm, samples, summary, timing })
}

/// Per-teat statistics of `samples`, one row per id in `order`.
pub fn summarize(samples: &[Sample], order: &[String], cycles: usize, threshold_mm: f64) -> Vec<TeatSummary> {
    order
        .iter()
        .map(|id| {
            let mine: Vec<&Sample> = samples.iter().filter(|s| &s.teat_id == id).collect();
            let tip: Vec<f64> = mine.iter().filter_map(|s| s.tip_error_mm).collect();
            let axis: Vec<f64> = mine.iter().filter_map(|s| s.axis_error_deg).collect();
            let tips: Vec<Point3<f64>> = mine.iter().filter_map(|s| s.tip_mm.map(Point3::from)).collect();
            let spread = (!tips.is_empty()).then(|| {
                let n = tips.len() as f64;
                let c = tips.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
                (tips.iter().map(|p| (p.coords - c).norm_squared()).sum::<f64>() / n).sqrt()
            });
            let hits = tip.iter().filter(|e| **e < threshold_mm).count();
            TeatSummary {
                teat_id: id.clone(),
                cycles,
                estimates: tip.len(),
                mean_tip_error_mm: mean_std(&tip).map(|m| m.0),
                std_tip_error_mm: mean_std(&tip).map(|m| m.1),
                tip_spread_mm: spread,
                success_rate: hits as f64 / cycles as f64,
                mean_axis_error_deg: mean_std(&axis).map(|m| m.0),
                std_axis_error_deg: mean_std(&axis).map(|m| m.1),
            }
        })
        .collect()
}

const RAW_COLUMNS: [&str; 11] = [
    "cycle",
    "teat_id",
    "noise_seed",
    "camera_seed",
    "status",
    "tip_error_mm",
    "axis_error_deg",
    "n_points",
    "tip_x_mm",
    "tip_y_mm",
    "tip_z_mm",
];

const SUMMARY_COLUMNS: [&str; 10] = [
    "teat_id",
    "cycles",
    "estimates",
    "mean_tip_error_mm",
    "std_tip_error_mm",
    "tip_spread_mm",
    "success_rate",
    "mean_axis_error_deg",
    "std_axis_error_deg",
    "threshold_mm",
];

impl RepeatabilityReport {
    pub fn raw_table(&self) -> Table {
        let mut t = Table::new(&RAW_COLUMNS);
        for s in &self.samples {
            let tip = |i: usize| fmt_opt(s.tip_mm.map(|p| p[i]));
            t.push(vec![
                s.cycle.to_string(),
                s.teat_id.clone(),
                s.noise_seed.to_string(),
                s.camera_seed.to_string(),
                s.status.clone(),
                fmt_opt(s.tip_error_mm),
                fmt_opt(s.axis_error_deg),
                s.n_points.map(|n| n.to_string()).unwrap_or_default(),
                tip(0),
                tip(1),
                tip(2),
            ]);
        }
        t
    }

    pub fn summary_table(&self) -> Table {
        summary_table(&self.summary, self.threshold_mm)
    }

    pub fn timing_table(&self) -> Table {
        let mut t = Table::new(&["stage", "cycles", "mean_ms", "p50_ms", "p95_ms", "max_ms"]);
        let n = self.summary.first().map_or(0, |s| s.cycles);
        for s in &self.timing {
            t.push(vec![
                s.stage.into(),
                n.to_string(),
                fmt_f64(s.mean_ms),
                fmt_f64(s.p50_ms),
                fmt_f64(s.p95_ms),
                fmt_f64(s.max_ms),
            ]);
        }
        t
    }

    /// Re-derives the summary from the serialized raw table and checks it
    /// against [`Self::summary`].
    pub fn verify(&self) -> Result<()> {
        let raw = Table::parse(&self.raw_table().to_csv()?)?;
        let samples = samples_from_table(&raw)?;
        let n_cycles = self.summary.first().map_or(0, |s| s.cycles);
        let cycles: std::collections::BTreeSet<usize> = samples.iter().map(|s| s.cycle).collect();
        if cycles.len() != n_cycles || cycles.iter().next_back().is_some_and(|&c| c + 1 != n_cycles) {
            return Err(Error::Invariant(format!("raw table holds {} cycles, expected {n_cycles}", cycles.len())));
        }
        let order: Vec<String> = self.summary.iter().map(|s| s.teat_id.clone()).collect();
        let again = summary_table(&summarize(&samples, &order, n_cycles, self.threshold_mm), self.threshold_mm);
        if again != self.summary_table() {
            return Err(Error::Invariant("summary does not match the raw sample table".into()));
        }
        for s in &self.summary {
            let std_ok = s.std_tip_error_mm.is_none_or(|v| v >= 0.0);
            if !std_ok || !(0.0..=1.0).contains(&s.success_rate) {
                return Err(Error::Invariant(format!("summary of {} out of range", s.teat_id)));
            }
        }
        Ok(())
    }

    /// Verifies, then writes `raw.csv`, `summary.csv`, `timing.csv` and
    /// `hist_<teat>.svg` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.verify()?;
        fs::create_dir_all(dir).at(dir)?;
        self.raw_table().write(&dir.join("raw.csv"))?;
        self.summary_table().write(&dir.join("summary.csv"))?;
        self.timing_table().write(&dir.join("timing.csv"))?;
        let max = (2.0 * self.threshold_mm).max(1e-3);
        for s in &self.summary {
            let errs: Vec<f64> =
                self.samples.iter().filter(|x| x.teat_id == s.teat_id).filter_map(|x| x.tip_error_mm).collect();
            let title = format!("{} tip error, {} cycles", s.teat_id, s.cycles);
            let path = dir.join(format!("hist_{}.svg", s.teat_id));
            fs::write(&path, histogram_svg(&title, "tip error (mm)", &errs, max, 40)).at(&path)?;
        }
        Ok(())
    }
}

fn summary_table(summary: &[TeatSummary], threshold_mm: f64) -> Table {
    let mut t = Table::new(&SUMMARY_COLUMNS);
    for s in summary {
        t.push(vec![
            s.teat_id.clone(),
            s.cycles.to_string(),
            s.estimates.to_string(),
            fmt_opt(s.mean_tip_error_mm),
            fmt_opt(s.std_tip_error_mm),
            fmt_opt(s.tip_spread_mm),
            fmt_f64(s.success_rate),
            fmt_opt(s.mean_axis_error_deg),
            fmt_opt(s.std_axis_error_deg),
            fmt_f64(threshold_mm),
        ]);
    }
    t
}

fn samples_from_table(t: &Table) -> Result<Vec<Sample>> {
    let col = |n: &str| t.column(n);
    let (ci, ti, ni, mi, si, ei, ai, pi, xi, yi, zi) = (
        col("cycle")?,
        col("teat_id")?,
        col("noise_seed")?,
        col("camera_seed")?,
        col("status")?,
        col("tip_error_mm")?,
        col("axis_error_deg")?,
        col("n_points")?,
        col("tip_x_mm")?,
        col("tip_y_mm")?,
        col("tip_z_mm")?,
    );
    let bad = |what: &str, v: &str| Error::Invariant(format!("unparsable {what} {v:?} in raw table"));
    let f = |v: &str| -> Result<Option<f64>> {
        if v.is_empty() {
            Ok(None)
        } else {
            v.parse().map(Some).map_err(|_| bad("number", v))
        }
    };
    t.rows
        .iter()
        .map(|r| {
            let tip = match (f(&r[xi])?, f(&r[yi])?, f(&r[zi])?) {
                (Some(x), Some(y), Some(z)) => Some([x, y, z]),
                _ => None,
            };
            Ok(Sample {
                cycle: r[ci].parse().map_err(|_| bad("cycle", &r[ci]))?,
                teat_id: r[ti].clone(),
                noise_seed: r[ni].parse().map_err(|_| bad("seed", &r[ni]))?,
                camera_seed: r[mi].parse().map_err(|_| bad("seed", &r[mi]))?,
                status: r[si].clone(),
                tip_error_mm: f(&r[ei])?,
                axis_error_deg: f(&r[ai])?,
                n_points: if r[pi].is_empty() { None } else { Some(r[pi].parse().map_err(|_| bad("count", &r[pi]))?) },
                tip_mm: tip,
            })
        })
        .collect()
}
