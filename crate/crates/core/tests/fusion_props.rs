mod common;

use std::sync::OnceLock;

use casnav::fusion::{replay, FusionModels, PoseOut, SensorEvent, Source};
use proptest::prelude::*;

fn models() -> &'static FusionModels {
    static M: OnceLock<FusionModels> = OnceLock::new();
    M.get_or_init(common::golden_fusion_models)
}

fn events() -> &'static [SensorEvent] {
    static E: OnceLock<Vec<SensorEvent>> = OnceLock::new();
    E.get_or_init(|| common::synthetic_events(2.0, 21))
}

fn run(ev: &[SensorEvent]) -> Vec<PoseOut> {
    replay(ev, models(), None, None).unwrap().poses
}

fn full() -> &'static [PoseOut] {
    static P: OnceLock<Vec<PoseOut>> = OnceLock::new();
    P.get_or_init(|| run(events()))
}

#[test]
fn truths_are_reported_exactly() {
    let by_t = |t: f64| events().iter().find(|e| e.t == t).unwrap();
    let mut both = 0;
    for p in full() {
        let e = by_t(p.t);
        if let Some(pos) = e.position {
            assert_eq!(p.position_source, Source::GroundTruth);
            assert_eq!(p.p, pos);
        }
        if let Some(ang) = e.orientation {
            assert_eq!(p.orientation_source, Source::GroundTruth);
            assert_eq!(p.angles, ang);
        }
        both += usize::from(e.position.is_some() && e.orientation.is_some());
    }
    assert!(both > 10);
}

#[test]
fn one_pose_per_event_once_running() {
    let poses = full();
    let first = events().iter().position(|e| e.t == poses[0].t).unwrap();
    assert_eq!(poses.len(), events().len() - first);
    for (p, e) in poses.iter().zip(&events()[first..]) {
        assert_eq!(p.t, e.t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Outputs never depend on later events.
    #[test]
    fn causal(cut in 1usize..400) {
        let ev = events();
        let cut = cut.min(ev.len());
        let head = run(&ev[..cut]);
        prop_assert_eq!(&head[..], &full()[..head.len()]);
    }

    /// A rejected event leaves the stream untouched.
    #[test]
    fn rejected_events_are_invisible(at in 0usize..400, nan in any::<bool>()) {
        let ev = events();
        let at = at.min(ev.len() - 1);
        let mut bad = ev[at].clone();
        if nan {
            bad.imu[2] = f64::NAN;
        } else {
            bad.t = ev[at].t - 1.0;
        }
        let mut with = ev.to_vec();
        with.insert(at + 1, bad);
        let r = replay(&with, models(), None, None).unwrap();
        prop_assert_eq!(r.summary.counters.dropped, 1);
        prop_assert_eq!(r.diagnostics.len(), 1);
        prop_assert_eq!(&r.poses[..], full());
    }

    /// Removing position truths changes nothing before the gap, never stalls
    /// the output and keeps orientation truths exact.
    #[test]
    fn occlusion(start in 0usize..300, len in 1usize..120) {
        let ev = events();
        let end = (start + len).min(ev.len());
        let mut occ = ev.to_vec();
        for e in &mut occ[start..end] {
            e.position = None;
        }
        let poses = run(&occ);
        let base = full();
        let first = ev.iter().position(|e| e.t == base[0].t).unwrap();
        if start > first {
            let pre = start - first;
            prop_assert_eq!(&poses[..pre], &base[..pre]);
        }
        let after_gap = poses.iter().filter(|p| p.t >= ev[end.min(ev.len() - 1)].t).count();
        prop_assert!(after_gap > 0 || end == ev.len());
        for p in &poses {
            prop_assert!(p.p.iter().chain(&p.angles).all(|v| v.is_finite()));
        }
    }

    /// Truth of either component replaces the estimate of that component.
    #[test]
    fn truth_dominance(at in 100usize..400, dp in prop::array::uniform3(-0.05f64..0.05)) {
        let ev = events();
        let at = at.min(ev.len() - 1);
        let mut edited = ev.to_vec();
        let p = edited[at].position.unwrap_or(ev[at - 1].position.unwrap_or([0.0; 3]));
        let moved = [p[0] + dp[0], p[1] + dp[1], p[2] + dp[2]];
        edited[at].position = Some(moved);
        let poses = run(&edited);
        if let Some(out) = poses.iter().find(|o| o.t == ev[at].t) {
            prop_assert_eq!(out.p, moved);
            prop_assert_eq!(out.position_source, Source::GroundTruth);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Predicted positions accumulate increments on top of the last truth,
    /// so translating every truth translates every output.
    #[test]
    fn translation_equivariant(c in prop::array::uniform3(-2.0f64..2.0)) {
        let shifted: Vec<SensorEvent> = events()
            .iter()
            .map(|e| {
                let mut e = e.clone();
                e.position = e.position.map(|p| [p[0] + c[0], p[1] + c[1], p[2] + c[2]]);
                e
            })
            .collect();
        let poses = run(&shifted);
        prop_assert_eq!(poses.len(), full().len());
        for (a, b) in poses.iter().zip(full()) {
            prop_assert_eq!(a.angles, b.angles);
            for k in 0..3 {
                prop_assert!((a.p[k] - b.p[k] - c[k]).abs() < 1e-9);
            }
        }
    }
}
