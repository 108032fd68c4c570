use serde::{Deserialize, Serialize};
use teatpose_core::frame::GeometryConfig;
use teatpose_core::gate::GateConfig;
use teatpose_core::schedule::LatencyModel;

use crate::error::{Error, Result};

/// Configuration of `teatpose run`. Every field has a default, so `{}` is
/// a valid config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub latency: LatencyModel,
    pub gate: GateConfig,
    pub geometry: GeometryConfig,
    /// Camera publish rate.
    pub camera_fps: f64,
    /// Camera frames in the stream.
    pub frames: usize,
    /// Approach waypoint distance before the tip, mm.
    pub standoff_mm: f64,
    /// Capacity of each inter-stage queue.
    pub queue_depth: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            latency: LatencyModel::default(),
            gate: GateConfig::default(),
            geometry: GeometryConfig::default(),
            camera_fps: 30.0,
            frames: 60,
            standoff_mm: 50.0,
            queue_depth: 2,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.latency.validate()?;
        self.gate.validate()?;
        self.geometry.validate()?;
        teatpose_core::schedule::camera_period_us(self.camera_fps)?;
        if self.frames == 0 {
            return Err(Error::Config("frames must be >= 1".into()));
        }
        if !(self.standoff_mm >= 0.0) || !self.standoff_mm.is_finite() {
            return Err(Error::Config("standoff_mm must be >= 0".into()));
        }
        if self.queue_depth == 0 {
            return Err(Error::Config("queue_depth must be >= 1".into()));
        }
        Ok(())
    }
}
