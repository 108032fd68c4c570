use teatpose::config::PipelineConfig;
use teatpose::pipeline::{run_pipeline, static_stream, Event, OracleSegmenter, SegmentationRequest, Segmenter};
use teatpose::{Error, Result};
use teatpose_core::gate::GateDecision;
use teatpose_core::synth::{NoiseModel, Occluder, SceneSpec};
use teatpose_core::{TeatMask, Vector3};

fn noiseless() -> SceneSpec {
    SceneSpec::default_four_teat().with_noise(NoiseModel::zero())
}

/// Gate decisions per track, in order.
fn decisions(events: &[Event]) -> Vec<Vec<GateDecision>> {
    let mut out: Vec<Vec<GateDecision>> = Vec::new();
    for e in events {
        if let Event::Gate { track, decision, .. } = e {
            if *track >= out.len() {
                out.resize(track + 1, Vec::new());
            }
            out[*track].push(*decision);
        }
    }
    out
}

#[test]
fn static_noiseless_scene_gates_on_the_fifth_frame() {
    let out = run_pipeline(static_stream(noiseless(), 0), &mut OracleSegmenter, &PipelineConfig::default()).unwrap();
    let fifth = out.schedule.processed[4].geometry_done_us;
    assert_eq!(out.tracks.len(), 4);
    for t in &out.tracks {
        assert_eq!(t.first_consistent_us, Some(fifth), "{}", t.label);
        assert_eq!(t.resets, 0);
        assert_eq!(t.poses, out.schedule.processed.len());
    }
    use GateDecision::{Consistent, Pending};
    for d in decisions(&out.events) {
        assert_eq!(d[..5], [Pending, Pending, Pending, Pending, Consistent]);
        assert!(d[5..].iter().all(|&x| x == Consistent));
    }
    assert_eq!(out.throughput_fps(), Some(5.0));
    assert_eq!(out.all_gated_us(), Some(fifth));
}

#[test]
fn frames_are_paced_by_inference_plus_network() {
    let out = run_pipeline(static_stream(noiseless(), 0), &mut OracleSegmenter, &PipelineConfig::default()).unwrap();
    let done: Vec<u64> = out.schedule.processed.iter().map(|f| f.geometry_done_us).collect();
    for w in done.windows(2).skip(1) {
        assert_eq!(w[1] - w[0], 200_000);
    }
    let drops = out.events.iter().filter(|e| matches!(e, Event::Drop { .. })).count();
    assert_eq!(drops + out.schedule.processed.len(), 60);
}

#[test]
fn a_jumping_teat_resets_only_its_own_track() {
    let base = noiseless();
    let mut moved = base.clone();
    moved.teats[0].base_mm += Vector3::new(20.0, 0.0, 0.0);
    moved.validate().unwrap();
    let jump_at = 30;
    let stream = move |k: usize| if k < jump_at { base.clone() } else { moved.clone() };
    let out = run_pipeline(stream, &mut OracleSegmenter, &PipelineConfig::default()).unwrap();

    assert_eq!(out.tracks.len(), 4, "the jump must not open a new track");
    let per_track = decisions(&out.events);
    let t1 = &per_track[0];
    assert_eq!(t1.iter().filter(|&&d| d == GateDecision::Reset).count(), 1);
    let reset = t1.iter().position(|&d| d == GateDecision::Reset).unwrap();
    assert!(t1[reset + 1..reset + 4].iter().all(|&d| d == GateDecision::Pending));
    assert_eq!(t1[reset + 4], GateDecision::Consistent);
    for (k, d) in per_track.iter().enumerate().skip(1) {
        assert!(!d.contains(&GateDecision::Reset), "track {k}");
        assert!(d[4..].iter().all(|&x| x == GateDecision::Consistent), "track {k}");
    }
    // the first frame captured after the jump is the one that resets
    let frame_of_reset = out
        .events
        .iter()
        .filter_map(|e| match e {
            Event::Gate { t_us, track: 0, decision: GateDecision::Reset, .. } => Some(*t_us),
            _ => None,
        })
        .next()
        .unwrap();
    let first_after = out.schedule.processed.iter().find(|f| f.frame >= jump_at).unwrap();
    assert_eq!(frame_of_reset, first_after.geometry_done_us);
}

struct Stale;

impl Segmenter for Stale {
    fn segment(&mut self, request: &SegmentationRequest) -> Result<Vec<TeatMask>> {
        let masks = OracleSegmenter.segment(request)?;
        Ok(masks.into_iter().map(|m| m.with_stamp(request.stamp_us + 1)).collect())
    }
}

#[test]
fn masks_with_a_foreign_stamp_stop_the_run() {
    let err = run_pipeline(static_stream(noiseless(), 0), &mut Stale, &PipelineConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Invariant(_)), "{err}");
}

struct Failing;

impl Segmenter for Failing {
    fn segment(&mut self, _: &SegmentationRequest) -> Result<Vec<TeatMask>> {
        Err(Error::Pipeline("segmentation service unavailable".into()))
    }
}

#[test]
fn segmentation_errors_are_propagated() {
    let err = run_pipeline(static_stream(noiseless(), 0), &mut Failing, &PipelineConfig::default()).unwrap_err();
    assert!(err.to_string().contains("unavailable"), "{err}");
}

#[test]
fn occluded_teat_is_skipped_and_others_still_gate() {
    let mut scene = noiseless();
    scene.occluders.push(Occluder { u0: 0, v0: 0, u1: 320, v1: 480 });
    let out = run_pipeline(static_stream(scene, 0), &mut OracleSegmenter, &PipelineConfig::default()).unwrap();
    assert!(!out.tracks.is_empty() && out.tracks.len() < 4);
    assert!(out.all_gated_us().is_some());
}

#[test]
fn replay_is_deterministic() {
    let run = || {
        run_pipeline(static_stream(SceneSpec::default_four_teat(), 3), &mut OracleSegmenter, &PipelineConfig::default())
            .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.events, b.events);
    assert_eq!(a.events_jsonl().unwrap(), b.events_jsonl().unwrap());
    assert_eq!(a.tracks, b.tracks);
}

#[test]
fn final_waypoint_is_the_gated_tip() {
    let config = PipelineConfig::default();
    for seed in 0..3 {
        let mut checked = 0;
        let out = run_pipeline(static_stream(SceneSpec::default_four_teat(), seed), &mut OracleSegmenter, &config).unwrap();
        let mut last_tip = None;
        for e in &out.events {
            match e {
                Event::Pose { pose, track, .. } => last_tip = Some((*track, pose.tip_mm, pose.axis)),
                Event::Gate { track, approach_mm: Some([standoff, tip]), decision, .. } => {
                    assert_eq!(*decision, GateDecision::Consistent);
                    let (t, gated, axis) = last_tip.unwrap();
                    assert_eq!(t, *track);
                    assert_eq!(*tip, gated);
                    let d = Vector3::from(*tip) - Vector3::from(*standoff);
                    assert!((d.norm() - config.standoff_mm).abs() < 1e-9);
                    assert!((d.normalize() - Vector3::from(axis)).norm() < 1e-9);
                    checked += 1;
                }
                Event::Gate { approach_mm: None, decision, .. } => assert_ne!(*decision, GateDecision::Consistent),
                _ => {}
            }
        }
        assert_eq!(checked, out.tracks.iter().map(|t| t.consistent).sum::<usize>());
        assert!(checked > 0);
    }
}

#[test]
fn event_log_is_json_lines_in_time_order() {
    let out = run_pipeline(static_stream(noiseless(), 0), &mut OracleSegmenter, &PipelineConfig::default()).unwrap();
    let log = out.events_jsonl().unwrap();
    let mut last = 0;
    let mut kinds = std::collections::BTreeSet::new();
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        kinds.insert(v["event"].as_str().unwrap().to_string());
        let t = ["t_us", "geometry_done_us", "capture_us"].iter().find_map(|k| v[k].as_u64()).unwrap();
        assert!(t >= last, "{line}");
        last = t;
    }
    for k in ["frame", "pose", "gate", "drop"] {
        assert!(kinds.contains(k), "{k} missing");
    }
}

#[test]
fn invalid_config_is_rejected() {
    let config = PipelineConfig { camera_fps: 0.0, ..PipelineConfig::default() };
    assert!(run_pipeline(static_stream(noiseless(), 0), &mut OracleSegmenter, &config).is_err());
}
