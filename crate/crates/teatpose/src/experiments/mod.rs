//! The evaluation experiments behind the `teatpose` subcommands.

mod camera_curve;
mod rate;
mod repeatability;

pub use camera_curve::{run_camera_curve, CurveConfig, CurvePreset, CurveReport, CurveRow, PresetFit};
pub use rate::{run_rate, RateConfig, RateReport, RateRow, RateTiming};
pub use repeatability::{
    run_repeatability, summarize, RepeatabilityConfig, RepeatabilityReport, Sample, StageTiming, TeatSummary,
};
