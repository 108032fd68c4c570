//! Arm-control consistency gate and cup-approach planning.
//!
//! A teat is actuated only after `window` successive pose estimates agree
//! pairwise: tips within `pos_tol_mm` and axes within `axis_tol_deg`.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::linalg::angle_between_deg;
use crate::pose::TeatPose;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct GateConfig {
    pub window: usize,
    pub pos_tol_mm: f64,
    pub axis_tol_deg: f64,
    /// Tip distance below which a pose continues an existing track.
    pub association_mm: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self { window: 5, pos_tol_mm: 3.0, axis_tol_deg: 5.0, association_mm: 15.0 }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::InvalidParameter(alloc::format!("gate window must be >= 2, got {}", self.window)));
        }
        for (name, v) in [
            ("pos_tol_mm", self.pos_tol_mm),
            ("axis_tol_deg", self.axis_tol_deg),
            ("association_mm", self.association_mm),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(alloc::format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum GateDecision {
    Pending,
    Consistent,
    Reset,
}

impl GateDecision {
    pub fn as_str(self) -> &'static str {
        match self {
            GateDecision::Pending => "pending",
            GateDecision::Consistent => "consistent",
            GateDecision::Reset => "reset",
        }
    }
}

/// Whether two poses agree within the gate tolerances.
pub fn poses_agree(a: &TeatPose, b: &TeatPose, config: &GateConfig) -> bool {
    (a.tip_mm - b.tip_mm).norm() <= config.pos_tol_mm && angle_between_deg(&a.axis, &b.axis) <= config.axis_tol_deg
}

/// Gate state of one teat track: the most recent mutually consistent poses.
#[derive(Debug, Clone)]
pub struct ConsistencyGate {
    config: GateConfig,
    window: VecDeque<TeatPose>,
}

impl ConsistencyGate {
    pub fn new(config: GateConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, window: VecDeque::with_capacity(config.window) })
    }

    pub fn config(&self) -> &GateConfig {
        &self.config
    }

    /// Poses currently held, oldest first. Always pairwise consistent.
    pub fn window(&self) -> impl ExactSizeIterator<Item = &TeatPose> {
        self.window.iter()
    }

    pub fn latest(&self) -> Option<&TeatPose> {
        self.window.back()
    }

    /// Adds a pose. The new pose is compared with the `window - 1` most
    /// recent ones; any disagreement resets the window to the new pose.
    pub fn update(&mut self, pose: TeatPose) -> GateDecision {
        let m = self.config.window;
        while self.window.len() >= m {
            self.window.pop_front();
        }
        if self.window.iter().any(|p| !poses_agree(p, &pose, &self.config)) {
            self.window.clear();
            self.window.push_back(pose);
            return GateDecision::Reset;
        }
        self.window.push_back(pose);
        if self.window.len() == m {
            GateDecision::Consistent
        } else {
            GateDecision::Pending
        }
    }
}

/// Free-function form of [`ConsistencyGate::update`].
pub fn gate_update(gate: &mut ConsistencyGate, pose: TeatPose) -> GateDecision {
    gate.update(pose)
}

/// Approach waypoints: the standoff point `tip - standoff * axis`, below
/// the tip, then the tip. The cup travels along `+axis` between them.
pub fn approach_plan(pose: &TeatPose, standoff_mm: f64) -> [Point3<f64>; 2] {
    [pose.tip_mm - pose.axis.as_ref() * standoff_mm, pose.tip_mm]
}

#[derive(Debug, Clone)]
pub struct Track {
    /// Label of the pose that opened the track.
    pub label: String,
    pub gate: ConsistencyGate,
}

/// Gate output for one pose of a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackUpdate {
    /// Index into [`TrackBank::tracks`].
    pub track: usize,
    pub teat_id: String,
    pub decision: GateDecision,
}

/// Per-teat gates with frame-to-frame identity association.
///
/// A pose continues the track whose latest tip is nearest, if within
/// `association_mm`. Otherwise it continues the track opened under the
/// same mask label, which turns a sudden jump into a gate reset instead of
/// a silent new track. Otherwise it opens a new track. Each track takes
/// at most one pose per frame; pairs are matched greedily by distance.
#[derive(Debug, Clone)]
pub struct TrackBank {
    config: GateConfig,
    tracks: Vec<Track>,
}

impl TrackBank {
    pub fn new(config: GateConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, tracks: Vec::new() })
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Feeds the poses of one frame; returns one update per pose, in input
    /// order.
    pub fn update_frame(&mut self, poses: &[TeatPose]) -> Vec<TrackUpdate> {
        let n_tracks = self.tracks.len();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (i, pose) in poses.iter().enumerate() {
            for (t, track) in self.tracks.iter().enumerate() {
                if let Some(last) = track.gate.latest() {
                    let d = (last.tip_mm - pose.tip_mm).norm();
                    if d <= self.config.association_mm {
                        pairs.push((d, i, t));
                    }
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut assigned: Vec<Option<usize>> = alloc::vec![None; poses.len()];
        let mut taken = alloc::vec![false; n_tracks];
        for (_, i, t) in pairs {
            if assigned[i].is_none() && !taken[t] {
                assigned[i] = Some(t);
                taken[t] = true;
            }
        }
        for (i, pose) in poses.iter().enumerate() {
            if assigned[i].is_some() {
                continue;
            }
            if let Some(t) = (0..n_tracks).find(|&t| !taken[t] && self.tracks[t].label == pose.teat_id) {
                assigned[i] = Some(t);
                taken[t] = true;
            }
        }

        let mut out = Vec::with_capacity(poses.len());
        for (i, pose) in poses.iter().enumerate() {
            let t = match assigned[i] {
                Some(t) => t,
                None => {
                    let gate = ConsistencyGate::new(self.config).expect("validated");
                    self.tracks.push(Track { label: pose.teat_id.clone(), gate });
                    self.tracks.len() - 1
                }
            };
            let decision = self.tracks[t].gate.update(pose.clone());
            out.push(TrackUpdate { track: t, teat_id: pose.teat_id.clone(), decision });
        }
        out
    }
}
