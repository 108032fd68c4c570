use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use teatpose::config::PipelineConfig;
use teatpose::experiments::{
    run_camera_curve, run_rate, run_repeatability, CurveConfig, RateConfig, RepeatabilityConfig,
};
use teatpose::formats::{
    load_scene, preset, read_json, write_json, CameraJson, GroundTruthJson, MaskJson, PoseJson, SceneJson,
};
use teatpose::pipeline::{run_pipeline, static_stream, OracleSegmenter};
use teatpose::ply::{load_ply, save_ply, PlyEncoding};
use teatpose::report::{fmt_f64, fmt_opt, Table};
use teatpose::{Error, Result};
use teatpose_core::frame::{estimate_frame, GeometryConfig};
use teatpose_core::synth::{occlude, render, SceneSpec};
use teatpose_core::Method;

#[derive(Parser)]
#[command(name = "teatpose", version, about = "Teat pose estimation experiments on synthetic udder scenes")]
struct Cli {
    /// Master seed; defaults to the scene's seed.
    #[arg(long, global = true, env = "TEATPOSE_SEED")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Repeated estimation cycles scored against ground truth.
    Repeatability {
        /// Scene JSON; the default four-teat scene if omitted.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, default_value_t = 789)]
        cycles: usize,
        /// Noise preset replacing the scene's noise model.
        #[arg(long)]
        noise: Option<String>,
        #[arg(long, default_value_t = Method::Pca)]
        method: Method,
        #[arg(long, default_value_t = 20.0)]
        eye_jitter_mm: f64,
        #[arg(long, default_value_t = 10.0)]
        target_jitter_mm: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plane-target depth error against distance, per noise preset.
    CameraCurve {
        /// Presets JSON; zero, orbbec-like and a1b3 if omitted.
        #[arg(long)]
        presets: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Geometry-path timing per contour stride.
    Rate {
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10")]
        strides: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Streams a static scene through the staged pipeline.
    Run {
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Pipeline config JSON; defaults for every missing field.
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON-lines event log. The summary and wall timings are written
        /// next to it as `<stem>.summary.csv` and `<stem>.timing.csv`.
        #[arg(long)]
        events: PathBuf,
    },
    /// Writes the default four-teat scene as JSON.
    Scene {
        #[arg(long)]
        noise: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Renders a scene to cloud.ply, masks.jsonl, camera.json and truth.json.
    Render {
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        ascii: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimates poses from files; prints one pose per line.
    Estimate {
        #[arg(long)]
        cloud: PathBuf,
        /// JSON lines, one mask per line.
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        camera: PathBuf,
        #[arg(long, default_value_t = Method::Pca)]
        method: Method,
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
}

fn scene_or_default(path: Option<&Path>) -> Result<SceneSpec> {
    match path {
        Some(p) => load_scene(p),
        None => Ok(SceneSpec::default_four_teat()),
    }
}

fn with_extension_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "events".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Repeatability { scene, cycles, noise, method, eye_jitter_mm, target_jitter_mm, out } => {
            let mut scene = scene_or_default(scene.as_deref())?;
            if let Some(name) = noise {
                scene.noise = preset(&name)?;
            }
            let cfg = RepeatabilityConfig {
                cycles,
                master_seed: cli.seed.unwrap_or(scene.seed),
                eye_jitter_mm,
                target_jitter_mm,
                geometry: GeometryConfig { method, ..GeometryConfig::default() },
                ..RepeatabilityConfig::default()
            };
            let report = run_repeatability(&scene, &cfg)?;
            report.write(&out)?;
            for s in &report.summary {
                println!(
                    "{}: mean {} mm, std {} mm, success {}",
                    s.teat_id,
                    fmt_opt(s.mean_tip_error_mm),
                    fmt_opt(s.std_tip_error_mm),
                    fmt_f64(s.success_rate)
                );
            }
        }
        Command::CameraCurve { presets, out } => {
            let cfg = match presets {
                Some(p) => read_json::<CurveConfig>(&p)?,
                None => CurveConfig::default(),
            };
            let report = run_camera_curve(&cfg, cli.seed.unwrap_or(0))?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            report.write(&out)?;
            for f in &report.fits {
                println!("{}: max error up to 1 m {} mm", f.preset, fmt_opt(f.fit.map(|c| c.max_error_1m)));
            }
        }
        Command::Rate { scene, strides, reps, out } => {
            let mut scene = scene_or_default(scene.as_deref())?;
            if let Some(seed) = cli.seed {
                scene.seed = seed;
            }
            let report = run_rate(&scene, &RateConfig { strides, reps, ..RateConfig::default() })?;
            report.write(&out)?;
            for (r, t) in report.rows.iter().zip(&report.timing) {
                println!(
                    "stride {}: {} vertices, geometry {:.2} ms mean, tip delta {} mm",
                    r.stride,
                    r.polygon_vertices,
                    t.geometry_mean_ms,
                    fmt_opt(r.max_tip_delta_mm)
                );
            }
        }
        Command::Run { scene, config, events } => {
            let scene = scene_or_default(scene.as_deref())?;
            let config = match config {
                Some(p) => read_json::<PipelineConfig>(&p)?,
                None => PipelineConfig::default(),
            };
            let seed = cli.seed.unwrap_or(scene.seed);
            let out = run_pipeline(static_stream(scene, seed), &mut OracleSegmenter, &config)?;
            fs::write(&events, out.events_jsonl()?).map_err(io_err(&events))?;

            let mut summary =
                Table::new(&["track", "label", "poses", "resets", "consistent", "first_consistent_us"]);
            for t in &out.tracks {
                summary.push(vec![
                    t.track.to_string(),
                    t.label.clone(),
                    t.poses.to_string(),
                    t.resets.to_string(),
                    t.consistent.to_string(),
                    t.first_consistent_us.map(|v| v.to_string()).unwrap_or_default(),
                ]);
            }
            summary.write(&with_extension_suffix(&events, "summary.csv"))?;
            let mut timing = Table::new(&["frame", "render_ms", "segmentation_ms", "geometry_ms"]);
            for w in &out.wall {
                timing.push(vec![
                    w.frame.to_string(),
                    fmt_f64(w.render_ms),
                    fmt_f64(w.segmentation_ms),
                    fmt_f64(w.geometry_ms),
                ]);
            }
            timing.write(&with_extension_suffix(&events, "timing.csv"))?;
            println!(
                "{} frames processed, {} fps simulated, all teats gated at {} us",
                out.schedule.processed.len(),
                fmt_opt(out.throughput_fps()),
                out.all_gated_us().map(|v| v.to_string()).unwrap_or_else(|| "never".into())
            );
        }
        Command::Scene { noise, out } => {
            let mut scene = SceneSpec::default_four_teat();
            if let Some(name) = noise {
                scene.noise = preset(&name)?;
            }
            if let Some(seed) = cli.seed {
                scene.seed = seed;
            }
            write_json(&out, &SceneJson::from(&scene))?;
        }
        Command::Render { scene, ascii, out } => {
            let mut scene = scene_or_default(scene.as_deref())?;
            if let Some(seed) = cli.seed {
                scene.seed = seed;
            }
            let r = render(&scene)?;
            fs::create_dir_all(&out).map_err(io_err(&out))?;
            let enc = if ascii { PlyEncoding::Ascii } else { PlyEncoding::BinaryLittleEndian };
            save_ply(&out.join("cloud.ply"), &r.cloud, enc)?;
            let mut masks = String::new();
            for m in occlude(&scene, &r.masks) {
                masks.push_str(&serde_json::to_string(&MaskJson::from(&m))?);
                masks.push('\n');
            }
            let path = out.join("masks.jsonl");
            fs::write(&path, masks).map_err(io_err(&path))?;
            write_json(&out.join("camera.json"), &CameraJson::from(&scene.camera))?;
            write_json(&out.join("truth.json"), &GroundTruthJson::from(&r.truth))?;
        }
        Command::Estimate { cloud, masks, camera, method, stride } => {
            let camera = read_json::<CameraJson>(&camera)?.to_camera()?;
            let cloud = load_ply(&cloud)?;
            let file = fs::File::open(&masks).map_err(io_err(&masks))?;
            let mut parsed = Vec::new();
            for line in BufReader::new(file).lines() {
                let line = line.map_err(io_err(&masks))?;
                if line.trim().is_empty() {
                    continue;
                }
                let m: MaskJson = serde_json::from_str(&line)?;
                parsed.push(m.to_mask(camera.width(), camera.height())?);
            }
            let stamp = parsed.first().map_or(0, |m| m.stamp_us());
            let g = GeometryConfig { method, contour_stride: stride, ..GeometryConfig::default() };
            let est = estimate_frame(stamp, &cloud, &parsed, &camera, &g)?;
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            for p in &est.poses {
                writeln!(lock, "{}", serde_json::to_string(&PoseJson::from(p))?).map_err(io_err(Path::new("stdout")))?;
            }
            for f in &est.failures {
                eprintln!("{}: {}", f.teat_id, f.error);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
