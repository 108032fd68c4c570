//! Simulated-time model of the staged pipeline.
//!
//! The camera publishes frames at a fixed period. Segmentation (remote
//! inference plus network transfer) and geometry are serial stages, each
//! fed by a one-slot queue that drops its oldest entry when a fresher one
//! arrives. All times are integer microseconds so replays are exact.

use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct LatencyModel {
    pub inference_ms: f64,
    pub network_ms: f64,
    pub geometry_budget_ms: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self { inference_ms: 150.0, network_ms: 50.0, geometry_budget_ms: 50.0 }
    }
}

pub fn ms_to_us(ms: f64) -> u64 {
    libm::round(ms * 1000.0) as u64
}

impl LatencyModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("inference_ms", self.inference_ms),
            ("network_ms", self.network_ms),
            ("geometry_budget_ms", self.geometry_budget_ms),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(alloc::format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Segmentation service time per frame.
    pub fn segmentation_us(&self) -> u64 {
        ms_to_us(self.inference_ms) + ms_to_us(self.network_ms)
    }

    pub fn geometry_budget_us(&self) -> u64 {
        ms_to_us(self.geometry_budget_ms)
    }

    /// Steady-state rate of the slowest stage for a given geometry time.
    pub fn steady_state_fps(&self, geometry_us: u64) -> f64 {
        let bottleneck = self.segmentation_us().max(geometry_us);
        if bottleneck == 0 {
            f64::INFINITY
        } else {
            1e6 / bottleneck as f64
        }
    }
}

/// Timeline of one processed camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameTiming {
    pub frame: usize,
    pub capture_us: u64,
    pub segmentation_start_us: u64,
    pub segmentation_done_us: u64,
    pub geometry_start_us: u64,
    pub geometry_done_us: u64,
}

impl FrameTiming {
    /// From segmentation start to the end of geometry.
    pub fn processing_us(&self) -> u64 {
        self.geometry_done_us - self.segmentation_start_us
    }

    /// From capture to the end of geometry, including queueing.
    pub fn end_to_end_us(&self) -> u64 {
        self.geometry_done_us - self.capture_us
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schedule {
    /// Processed frames in completion order.
    pub processed: Vec<FrameTiming>,
    /// Frames dropped at the segmentation queue.
    pub dropped_before_segmentation: Vec<usize>,
    /// Frames dropped at the geometry queue.
    pub dropped_before_geometry: Vec<usize>,
}

impl Schedule {
    /// Completed frames per second between the first and the last
    /// completion. `None` with fewer than two completed frames.
    pub fn throughput_fps(&self) -> Option<f64> {
        let (first, last) = (self.processed.first()?, self.processed.last()?);
        let span = last.geometry_done_us - first.geometry_done_us;
        if self.processed.len() < 2 || span == 0 {
            return None;
        }
        Some((self.processed.len() - 1) as f64 * 1e6 / span as f64)
    }
}

/// Frame period for a camera rate.
pub fn camera_period_us(fps: f64) -> Result<u64> {
    if !(fps > 0.0) || !fps.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!("camera fps must be > 0, got {fps}")));
    }
    Ok(libm::round(1e6 / fps) as u64)
}

/// Schedules `n_frames` camera frames captured every `period_us`.
/// `geometry_us(frame)` is the geometry time charged for a frame.
pub fn simulate<F>(model: &LatencyModel, period_us: u64, n_frames: usize, mut geometry_us: F) -> Result<Schedule>
where
    F: FnMut(usize) -> u64,
{
    model.validate()?;
    if period_us == 0 {
        return Err(Error::InvalidParameter("camera period must be > 0".into()));
    }
    let capture = |k: usize| k as u64 * period_us;
    let seg = model.segmentation_us();
    let mut out = Schedule::default();

    // segmentation stage: take the freshest captured frame when free
    let mut segmented: Vec<(usize, u64, u64)> = Vec::new();
    let mut free = 0u64;
    let mut k = 0usize;
    while k < n_frames {
        let start = free.max(capture(k));
        let mut take = k;
        while take + 1 < n_frames && capture(take + 1) <= start {
            out.dropped_before_segmentation.push(take);
            take += 1;
        }
        segmented.push((take, start, start + seg));
        free = start + seg;
        k = take + 1;
    }

    // geometry stage: same rule over segmentation outputs
    let mut free = 0u64;
    let mut i = 0usize;
    while i < segmented.len() {
        let start = free.max(segmented[i].2);
        let mut take = i;
        while take + 1 < segmented.len() && segmented[take + 1].2 <= start {
            out.dropped_before_geometry.push(segmented[take].0);
            take += 1;
        }
        let (frame, seg_start, seg_done) = segmented[take];
        let done = start + geometry_us(frame);
        out.processed.push(FrameTiming {
            frame,
            capture_us: capture(frame),
            segmentation_start_us: seg_start,
            segmentation_done_us: seg_done,
            geometry_start_us: start,
            geometry_done_us: done,
        });
        free = done;
        i = take + 1;
    }
    Ok(out)
}
