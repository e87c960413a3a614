use std::f64::consts::PI;

use proptest::prelude::*;
use rhombot_core::actuation::{
    actuation_torque, can_disconnect_single_sided, disconnect_threshold, resisting_torque, ChordProfile,
};
use rhombot_core::{ActuationParams, Direction, StrokeModel};

const A: f64 = 0.14;

#[test]
fn threshold_agrees_with_grid_scan() {
    let p = ActuationParams::default();
    let star = disconnect_threshold(&p, A).unwrap().unwrap();
    assert!((star.to_degrees() - 51.1).abs() < 0.2, "{}", star.to_degrees());
    let n = 10_000;
    let first = (1..n)
        .map(|i| PI * i as f64 / n as f64)
        .find(|&th| can_disconnect_single_sided(&p, A, th).unwrap())
        .unwrap();
    assert!((first - star).abs() <= PI / n as f64);
}

#[test]
fn threshold_absent_when_drive_never_wins() {
    let p = ActuationParams { fe: 500.0, ..Default::default() };
    assert_eq!(disconnect_threshold(&p, A).unwrap(), None);
    // weak magnets move the threshold toward zero but it always exists
    let p = ActuationParams { fe: 1e-6, eps: 1e-6, ..Default::default() };
    assert!(disconnect_threshold(&p, A).unwrap().unwrap() < 1e-5);
}

#[test]
fn hysteresis_angle() {
    let p = ActuationParams::default();
    assert!((p.hysteresis_angle_deg() - 131.87).abs() < 0.05);
}

#[test]
fn constant_profile_needs_no_stroke() {
    let mut m = StrokeModel::with_profile(ActuationParams::default(), A, |_: f64, _: f64| 0.25);
    assert_eq!(m.stroke(1.0, 2.0, Direction::Forward).travel, 0.0);
}

proptest! {
    #[test]
    fn torques_scale_linearly(k in 0.2f64..5.0, th in 0.1f64..3.0) {
        let p = ActuationParams::default();
        let md = actuation_torque(&p, A, th);
        prop_assert!((actuation_torque(&p, k * A, th) - k * md).abs() < 1e-9 * md.max(1.0));
        let scaled = ActuationParams { t: k * p.t, ..p };
        prop_assert!((actuation_torque(&scaled, A, th) - k * md).abs() < 1e-9 * md.max(1.0));
        let mf = resisting_torque(&p, A).unwrap();
        let forces = ActuationParams { fe: k * p.fe, eps: k * p.eps, ..p };
        prop_assert!((resisting_torque(&forces, A).unwrap() - k * mf).abs() < 1e-9);
    }

    #[test]
    fn feasibility_is_monotone(a in 0.01f64..3.1, b in 0.01f64..3.1) {
        let p = ActuationParams::default();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if can_disconnect_single_sided(&p, A, lo).unwrap() {
            prop_assert!(can_disconnect_single_sided(&p, A, hi).unwrap());
        }
    }

    #[test]
    fn strokes_add_over_segments(t0 in 0.8f64..2.3, f1 in 0.0f64..1.0, f2 in 0.0f64..1.0) {
        let t1 = t0 + (2.35 - t0) * f1;
        let t2 = t1 + (2.35 - t1) * f2;
        let mut m = StrokeModel::with_profile(ActuationParams::default(), A, ChordProfile::default());
        let whole = m.stroke(t0, t2, Direction::Forward).total();
        m.reset();
        let a = m.stroke(t0, t1, Direction::Forward).total();
        let b = m.stroke(t1, t2, Direction::Forward).total();
        prop_assert!((whole - a - b).abs() < 1e-6);
    }

    #[test]
    fn round_trip_differs_by_hysteresis(t0 in 0.8f64..2.3, t1 in 0.8f64..2.3) {
        let mut m = StrokeModel::new(ActuationParams::default(), A);
        let fwd = m.stroke(t0, t1, Direction::Forward);
        let rev = m.stroke(t1, t0, Direction::Reverse);
        prop_assert_eq!(rev.hysteresis - fwd.hysteresis, 1500);
        prop_assert_eq!(rev.travel, fwd.travel);
    }
}
