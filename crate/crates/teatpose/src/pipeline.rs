//! Staged message-passing pipeline: intake, segmentation, pose estimation
//! and the arm-control gate, each on its own thread, connected by bounded
//! queues.
//!
//! Latency is simulated. The frame schedule (which camera frames are
//! processed and when each stage finishes) comes from
//! [`teatpose_core::schedule::simulate`] with the geometry stage charged its
//! budget, so the event log depends only on the scene stream and the
//! config. Wall-clock stage times are reported separately.

use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::sync::Arc;
use std::thread;
use std::time::Instant;

use serde::Serialize;
use teatpose_core::frame::{estimate_frame, FrameEstimate};
use teatpose_core::gate::{approach_plan, GateDecision, TrackBank};
use teatpose_core::schedule::{camera_period_us, simulate, FrameTiming, Schedule};
use teatpose_core::synth::{occlude_with, render_frame, Occluder, Rendered, SceneSpec};
use teatpose_core::{CameraModel, PointCloud, TeatMask};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::formats::PoseJson;

/// Input of a segmentation service: the captured frame.
#[derive(Debug, Clone)]
pub struct SegmentationRequest {
    pub stamp_us: u64,
    pub frame: Arc<Rendered>,
    pub occluders: Vec<Occluder>,
}

/// The segmentation node. Implementations must stamp their masks with the
/// request stamp.
pub trait Segmenter: Send {
    fn segment(&mut self, request: &SegmentationRequest) -> Result<Vec<TeatMask>>;
}

/// Returns the renderer's exact masks, clipped by the scene occluders.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleSegmenter;

impl Segmenter for OracleSegmenter {
    fn segment(&mut self, request: &SegmentationRequest) -> Result<Vec<TeatMask>> {
        let labels = &request.frame.truth.labels;
        let masks = occlude_with(&request.frame.masks, &request.occluders, labels.width, labels.height);
        Ok(masks.into_iter().map(|m| m.with_stamp(request.stamp_us)).collect())
    }
}

/// A synchronized camera frame travelling to the pose stage; the masks
/// arrive later through `masks_promise`.
pub struct FrameMessage {
    pub frame: usize,
    pub stamp_us: u64,
    pub cloud: PointCloud,
    pub camera: CameraModel,
    pub masks_promise: Receiver<Result<(Vec<TeatMask>, f64)>>,
}

/// Log record. All times are simulated microseconds from the first
/// capture.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Drop { frame: usize, capture_us: u64, stage: &'static str },
    Frame {
        frame: usize,
        stamp_us: u64,
        segmentation_start_us: u64,
        segmentation_done_us: u64,
        geometry_start_us: u64,
        geometry_done_us: u64,
        n_masks: usize,
        n_poses: usize,
    },
    Pose {
        t_us: u64,
        track: usize,
        #[serde(flatten)]
        pose: PoseJson,
    },
    Failure { t_us: u64, stamp_us: u64, teat_id: String, error: String },
    Gate {
        t_us: u64,
        track: usize,
        teat_id: String,
        decision: GateDecision,
        #[serde(skip_serializing_if = "Option::is_none")]
        approach_mm: Option<[[f64; 3]; 2]>,
    },
}

/// Per-frame wall times, ms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallTiming {
    pub frame: usize,
    pub render_ms: f64,
    pub segmentation_ms: f64,
    pub geometry_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackSummary {
    pub track: usize,
    pub label: String,
    pub poses: usize,
    pub resets: usize,
    pub consistent: usize,
    /// Simulated time of the first consistent decision.
    pub first_consistent_us: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub schedule: Schedule,
    pub events: Vec<Event>,
    pub tracks: Vec<TrackSummary>,
    pub wall: Vec<WallTiming>,
}

impl RunOutput {
    pub fn throughput_fps(&self) -> Option<f64> {
        self.schedule.throughput_fps()
    }

    /// Time by which every track has been consistent at least once.
    pub fn all_gated_us(&self) -> Option<u64> {
        if self.tracks.is_empty() {
            return None;
        }
        self.tracks.iter().map(|t| t.first_consistent_us).collect::<Option<Vec<_>>>()?.into_iter().max()
    }

    pub fn events_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }
}

struct PoseMessage {
    timing: FrameTiming,
    n_masks: usize,
    estimate: FrameEstimate,
    wall: WallTiming,
}

fn stage_gone(stage: &str) -> Error {
    Error::Pipeline(format!("{stage} stage stopped early"))
}

/// Runs `config.frames` camera frames; `scene_at(k)` is the scene captured
/// in frame `k`. Frames dropped by the schedule are never rendered.
pub fn run_pipeline<F>(scene_at: F, segmenter: &mut dyn Segmenter, config: &PipelineConfig) -> Result<RunOutput>
where
    F: Fn(usize) -> SceneSpec + Sync,
{
    config.validate()?;
    let budget = config.latency.geometry_budget_us();
    let schedule = simulate(&config.latency, camera_period_us(config.camera_fps)?, config.frames, |_| budget)?;
    let depth = config.queue_depth;

    let (seg_tx, seg_rx) = sync_channel::<(SegmentationRequest, SyncSender<Result<(Vec<TeatMask>, f64)>>)>(depth);
    let (frame_tx, frame_rx) = sync_channel::<(FrameTiming, FrameMessage, f64)>(depth);
    let (pose_tx, pose_rx) = sync_channel::<Result<PoseMessage>>(depth);

    let processed = schedule.processed.clone();
    let scene_at = &scene_at;
    let geometry = config.geometry;

    let gated = thread::scope(|s| {
        let intake = s.spawn(move || -> Result<()> {
            for timing in processed {
                let scene = scene_at(timing.frame);
                let t0 = Instant::now();
                let rendered = Arc::new(render_frame(&scene, timing.capture_us)?);
                let render_ms = t0.elapsed().as_secs_f64() * 1e3;
                let (promise_tx, promise_rx) = sync_channel(1);
                let request = SegmentationRequest {
                    stamp_us: timing.capture_us,
                    frame: Arc::clone(&rendered),
                    occluders: scene.occluders.clone(),
                };
                seg_tx.send((request, promise_tx)).map_err(|_| stage_gone("segmentation"))?;
                let message = FrameMessage {
                    frame: timing.frame,
                    stamp_us: timing.capture_us,
                    cloud: rendered.cloud.clone(),
                    camera: scene.camera.clone(),
                    masks_promise: promise_rx,
                };
                frame_tx.send((timing, message, render_ms)).map_err(|_| stage_gone("pose"))?;
            }
            Ok(())
        });

        let segmentation = s.spawn(move || {
            for (request, promise) in seg_rx {
                let t0 = Instant::now();
                let masks = segmenter.segment(&request).map(|m| (m, t0.elapsed().as_secs_f64() * 1e3));
                // the pose stage may have stopped; nothing to do then
                let _ = promise.send(masks);
            }
        });

        let pose_stage = s.spawn(move || {
            for (timing, message, render_ms) in frame_rx {
                let result = message
                    .masks_promise
                    .recv()
                    .map_err(|_| stage_gone("segmentation"))
                    .and_then(|r| r)
                    .and_then(|(masks, segmentation_ms)| {
                        if let Some(m) = masks.iter().find(|m| m.stamp_us() != message.stamp_us) {
                            return Err(Error::Invariant(format!(
                                "mask {} stamped {} paired with cloud stamped {}",
                                m.teat_id(),
                                m.stamp_us(),
                                message.stamp_us
                            )));
                        }
                        let t0 = Instant::now();
                        let estimate = estimate_frame(message.stamp_us, &message.cloud, &masks, &message.camera, &geometry)?;
                        let geometry_ms = t0.elapsed().as_secs_f64() * 1e3;
                        Ok(PoseMessage {
                            timing,
                            n_masks: masks.len(),
                            estimate,
                            wall: WallTiming { frame: message.frame, render_ms, segmentation_ms, geometry_ms },
                        })
                    });
                let failed = result.is_err();
                if pose_tx.send(result).is_err() || failed {
                    break;
                }
            }
        });

        let gated = gate_stage(pose_rx, config);
        let intake = intake.join().map_err(|_| Error::Pipeline("intake panicked".into()))?;
        segmentation.join().map_err(|_| Error::Pipeline("segmentation panicked".into()))?;
        pose_stage.join().map_err(|_| Error::Pipeline("pose stage panicked".into()))?;
        // a downstream error explains an intake send failure, so report it first
        let gated = gated?;
        intake?;
        Ok::<_, Error>(gated)
    })?;

    let (mut events, tracks, wall) = gated;
    let period = camera_period_us(config.camera_fps)?;
    events.extend(
        schedule
            .dropped_before_segmentation
            .iter()
            .map(|&f| (f, "segmentation"))
            .chain(schedule.dropped_before_geometry.iter().map(|&f| (f, "geometry")))
            .map(|(frame, stage)| Event::Drop { frame, capture_us: frame as u64 * period, stage }),
    );
    // chronological; stable, so records of one frame keep their order
    events.sort_by_key(|e| match e {
        Event::Drop { capture_us, .. } => *capture_us,
        Event::Frame { geometry_done_us, .. } => *geometry_done_us,
        Event::Pose { t_us, .. } | Event::Failure { t_us, .. } | Event::Gate { t_us, .. } => *t_us,
    });
    Ok(RunOutput { schedule, events, tracks, wall })
}

type Gated = (Vec<Event>, Vec<TrackSummary>, Vec<WallTiming>);

fn gate_stage(rx: Receiver<Result<PoseMessage>>, config: &PipelineConfig) -> Result<Gated> {
    let mut bank = TrackBank::new(config.gate)?;
    let mut events = Vec::new();
    let mut tracks: Vec<TrackSummary> = Vec::new();
    let mut wall = Vec::new();
    for message in rx {
        let PoseMessage { timing, n_masks, estimate, wall: w } = message?;
        let t = timing.geometry_done_us;
        wall.push(w);
        events.push(Event::Frame {
            frame: timing.frame,
            stamp_us: estimate.stamp_us,
            segmentation_start_us: timing.segmentation_start_us,
            segmentation_done_us: timing.segmentation_done_us,
            geometry_start_us: timing.geometry_start_us,
            geometry_done_us: t,
            n_masks,
            n_poses: estimate.poses.len(),
        });
        for f in &estimate.failures {
            events.push(Event::Failure {
                t_us: t,
                stamp_us: estimate.stamp_us,
                teat_id: f.teat_id.clone(),
                error: f.error.to_string(),
            });
        }
        let updates = bank.update_frame(&estimate.poses);
        for (pose, u) in estimate.poses.iter().zip(updates) {
            if u.track == tracks.len() {
                tracks.push(TrackSummary {
                    track: u.track,
                    label: bank.tracks()[u.track].label.clone(),
                    poses: 0,
                    resets: 0,
                    consistent: 0,
                    first_consistent_us: None,
                });
            }
            let summary = &mut tracks[u.track];
            summary.poses += 1;
            let approach_mm = match u.decision {
                GateDecision::Consistent => {
                    summary.consistent += 1;
                    summary.first_consistent_us.get_or_insert(t);
                    let [a, b] = approach_plan(pose, config.standoff_mm);
                    Some([a.coords.into(), b.coords.into()])
                }
                GateDecision::Reset => {
                    summary.resets += 1;
                    None
                }
                GateDecision::Pending => None,
            };
            events.push(Event::Pose { t_us: t, track: u.track, pose: PoseJson::from(pose) });
            events.push(Event::Gate { t_us: t, track: u.track, teat_id: u.teat_id, decision: u.decision, approach_mm });
        }
    }
    Ok((events, tracks, wall))
}

/// The same scene in every frame, with a fresh noise seed per frame.
pub fn static_stream(scene: SceneSpec, master_seed: u64) -> impl Fn(usize) -> SceneSpec + Sync {
    move |k| scene.clone().with_seed(crate::derive_seed(master_seed, crate::STREAM_FRAME, k as u64))
}
