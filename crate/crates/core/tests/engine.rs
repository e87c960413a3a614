mod common;

use common::*;
use rhombot_core::engine::{execute_morph, morphpivot, run_script};
use rhombot_core::geometry::deg;
use rhombot_core::{
    Coupling, EngineConfig, EngineError, FrameEvent, KTree, MorphPivotOp, MorphPlan, MorphTarget,
    Stage, TopologyError,
};

fn targets(list: &[(u32, f64)]) -> Vec<MorphTarget> {
    list.iter()
        .enumerate()
        .map(|(order, &(m, th))| MorphTarget {
            module: id(m),
            theta: deg(th),
            order: order as u32,
        })
        .collect()
}

fn triangle_op() -> MorphPivotOp {
    MorphPivotOp {
        new_con: (e(3, 3), e(2, 0)),
        new_discon: (id(1), id(3)),
        pre_morph: MorphPlan::Align {
            modules: vec![id(1), id(2), id(3)],
            coupling: Coupling::Independent,
        },
        post_morph: targets(&[(1, 90.0), (2, 90.0), (3, 90.0)]),
        morph_rate: 0.2,
    }
}

#[test]
fn single_module_ramp_frame_count() {
    let t = chain(1, 90.0);
    let cfg = EngineConfig { dt: 0.1, ..Default::default() };
    let out = execute_morph(&t, &targets(&[(0, 120.0)]), 0.2, &cfg).unwrap();
    // t = 0 plus ceil(2.618 / 0.1) = 27 steps
    assert_eq!(out.frames.len(), 28);
    let last = out.frames.last().unwrap();
    assert!((last.time - deg(30.0) / 0.2).abs() < 1e-12);
    assert!((last.modules[0].state.theta() - deg(120.0)).abs() < 1e-15);
}

#[test]
fn noop_morph_is_one_frame() {
    let t = chain(2, 90.0);
    let out = execute_morph(&t, &targets(&[(0, 90.0), (1, 90.0)]), 0.2, &EngineConfig::default()).unwrap();
    assert_eq!(out.frames.len(), 1);
    assert_eq!(out.tree, t);
}

#[test]
fn invalid_targets_and_timing() {
    let t = chain(2, 90.0);
    let cfg = EngineConfig::default();
    assert!(matches!(
        execute_morph(&t, &targets(&[(0, 140.0)]), 0.2, &cfg),
        Err(EngineError::Kinematics(_))
    ));
    assert!(matches!(
        execute_morph(&t, &targets(&[(0, 100.0)]), 0.0, &cfg),
        Err(EngineError::InvalidTiming { .. })
    ));
    assert!(matches!(
        execute_morph(&t, &targets(&[(5, 100.0)]), 0.2, &cfg),
        Err(EngineError::Topology(TopologyError::UnknownModule(_)))
    ));
}

#[test]
fn sequential_order_and_sigma_steps() {
    let t = chain(3, 90.0);
    let cfg = EngineConfig::default();
    let tg = targets(&[(2, 110.0), (1, 70.0), (0, 100.0)]);
    let out = execute_morph(&t, &tg, 0.2, &cfg).unwrap();
    for w in out.frames.windows(2) {
        let moving: Vec<_> = w[0]
            .modules
            .iter()
            .zip(&w[1].modules)
            .filter(|(a, b)| a.state.sigma != b.state.sigma)
            .map(|(a, b)| {
                assert!((a.state.sigma - b.state.sigma).abs() <= 0.2 * cfg.dt + 1e-12);
                a.state.id
            })
            .collect();
        assert!(moving.len() <= 1, "sequential mode moved {moving:?} together");
    }
    let fin = &out.tree;
    for target in &tg {
        assert!((fin.module(target.module).unwrap().theta() - target.theta).abs() < 1e-15);
    }
}

#[test]
fn simultaneous_mode_moves_together() {
    let t = chain(3, 90.0);
    let cfg = EngineConfig {
        mode: rhombot_core::MorphMode::Simultaneous,
        ..Default::default()
    };
    let out = execute_morph(&t, &targets(&[(1, 100.0), (2, 100.0)]), 0.2, &cfg).unwrap();
    let second = &out.frames[1];
    assert!(second.modules[1].state.theta() > deg(90.0));
    assert!(second.modules[2].state.theta() > deg(90.0));
}

#[test]
fn sweeping_through_a_neighbor_collides() {
    // the open square: M2 sits right above M3 without a connection
    let open = square().disconnect(id(2), id(3)).unwrap();
    let cfg = EngineConfig::default();
    let results: Vec<_> = [60.0, 120.0]
        .iter()
        .map(|th| execute_morph(&open, &targets(&[(1, *th)]), 0.2, &cfg))
        .collect();
    let collided = results.iter().any(|r| {
        matches!(r, Err(EngineError::Collision { a, b, time }) if *a == id(2) && *b == id(3) && *time > 0.0)
    });
    assert!(collided, "{results:?}");
}

#[test]
fn morphing_inside_a_closed_loop_breaks_it() {
    let cfg = EngineConfig::default();
    let err = execute_morph(&square(), &targets(&[(1, 100.0)]), 0.2, &cfg).unwrap_err();
    assert!(matches!(err, EngineError::LoopBroken { .. }), "{err:?}");
}

#[test]
fn triangle_morphpivot() {
    let cfg = EngineConfig::default();
    let out = morphpivot(&triangle(), &triangle_op(), &cfg).unwrap();
    assert!(out.report.pass);
    assert!(out.report.position_offset < 1e-8 && out.report.angular_offset < 1e-8, "{:?}", out.report);
    let t = &out.tree;
    t.check_invariants().unwrap();
    assert_eq!(t.parent_of(id(3)).unwrap().0, id(2));
    assert!(!t.connected(id(1), id(3)));
    for m in 1..=3 {
        assert!((t.module(id(m)).unwrap().theta() - deg(90.0)).abs() < 1e-12);
    }
    let events: Vec<_> = out.frames.iter().map(|f| f.event).filter(|e| *e != FrameEvent::Morph).collect();
    assert_eq!(events, [FrameEvent::Connect, FrameEvent::Disconnect, FrameEvent::Reparent]);
    for w in out.frames.windows(2) {
        assert!(w[1].time >= w[0].time);
    }
}

/// Edges meeting at the shared corner with an angular gap `g` have
/// midpoints `2a sin(g / 2)` apart and yaws `g` away from opposite.
fn gap_oracle(gap_deg: f64) -> (f64, f64) {
    (2.0 * A * (deg(gap_deg) / 2.0).sin(), deg(gap_deg))
}

#[test]
fn near_miss_docking_matches_the_corner_gap() {
    let cfg = EngineConfig::default();
    // all three at 119 degrees: 3 degree gap, 7.3 mm apart -> rejected, nothing changes
    let op = MorphPivotOp {
        pre_morph: MorphPlan::Targets(targets(&[(1, 119.0), (2, 119.0), (3, 119.0)])),
        ..triangle_op()
    };
    let out = morphpivot(&triangle(), &op, &cfg).unwrap();
    let (p, a) = gap_oracle(3.0);
    assert!((out.report.position_offset - p).abs() < 1e-12, "{:?}", out.report);
    assert!((out.report.angular_offset - a).abs() < 1e-12);
    assert!(!out.report.pass);
    assert_eq!(out.tree, triangle());

    // one module at 119: 1 degree gap, 2.4 mm -> docks
    let op = MorphPivotOp {
        pre_morph: MorphPlan::Targets(targets(&[(1, 119.0), (2, 120.0), (3, 120.0)])),
        ..triangle_op()
    };
    let out = morphpivot(&triangle(), &op, &cfg).unwrap();
    let (p, a) = gap_oracle(1.0);
    assert!((out.report.position_offset - p).abs() < 1e-12);
    assert!((out.report.angular_offset - a).abs() < 1e-12);
    assert!(out.report.pass);
    assert_eq!(out.tree.parent_of(id(3)).unwrap().0, id(2));
}

#[test]
fn splitting_disconnect_is_reported_with_stage() {
    let cfg = EngineConfig::default();
    let op = MorphPivotOp {
        new_discon: (id(1), id(2)),
        ..triangle_op()
    };
    // after connecting M2-M3, cutting M1-M2 is fine; cut a pair that is not connected instead
    let bad = MorphPivotOp {
        new_discon: (id(2), id(2)),
        ..op.clone()
    };
    let err = morphpivot(&triangle(), &bad, &cfg).unwrap_err();
    assert!(matches!(err, EngineError::Stage { stage: Stage::Disconnect, .. }), "{err:?}");
    morphpivot(&triangle(), &op, &cfg).unwrap().tree.check_invariants().unwrap();
}

fn mirror(op: &MorphPivotOp, released: (rhombot_core::EdgeRef, rhombot_core::EdgeRef)) -> MorphPivotOp {
    let mut pre: Vec<MorphTarget> = op.post_morph.clone();
    pre.reverse();
    let n = pre.len() as u32;
    let orig_pre = match &op.pre_morph {
        MorphPlan::Targets(t) => t.clone(),
        MorphPlan::Align { .. } => unreachable!(),
    };
    let mut post = orig_pre;
    post.reverse();
    for (i, t) in post.iter_mut().enumerate() {
        t.order = i as u32;
    }
    let pre: Vec<MorphTarget> = pre
        .into_iter()
        .enumerate()
        .map(|(i, t)| MorphTarget { order: i as u32, ..t })
        .collect();
    let _ = n;
    // going back: the pre-morph of the mirror restores the pre-morph targets
    MorphPivotOp {
        new_con: released,
        new_discon: (op.new_con.0.module, op.new_con.1.module),
        pre_morph: MorphPlan::Targets(
            post.iter().map(|t| MorphTarget { theta: t.theta, ..*t }).collect(),
        ),
        post_morph: pre,
        morph_rate: op.morph_rate,
    }
}

fn adjacency(t: &KTree) -> Vec<(rhombot_core::EdgeRef, rhombot_core::EdgeRef)> {
    let mut v = t.physical_connections();
    v.sort();
    v
}

#[test]
fn mirror_op_restores_the_start() {
    let cfg = EngineConfig::default();
    let start = triangle();
    let op = MorphPivotOp {
        pre_morph: MorphPlan::Targets(targets(&[(1, 120.0), (2, 120.0), (3, 120.0)])),
        ..triangle_op()
    };
    let there = morphpivot(&start, &op, &cfg).unwrap();
    let back_op = mirror(&op, (e(1, 1), e(3, 0)));
    let back = morphpivot(&there.tree, &back_op, &cfg).unwrap();
    assert!(back.report.pass);
    assert_eq!(adjacency(&back.tree), adjacency(&start));
    for s in start.modules() {
        let b = back.tree.module(s.id).unwrap();
        assert!((b.theta() - s.theta()).abs() < 1e-9);
        assert!((b.sigma - s.sigma).abs() < 1e-9);
        assert_eq!(b.e0, s.e0);
    }
    assert_eq!(back.tree.parent_of(id(3)).unwrap().0, id(1));
}

#[test]
fn script_stops_at_first_failure() {
    let cfg = EngineConfig::default();
    let empty = run_script(&triangle(), &[], &cfg);
    assert_eq!(empty.tree, triangle());
    assert!(empty.failure.is_none());

    let infeasible = MorphPivotOp {
        new_con: (e(1, 1), e(3, 0)),
        new_discon: (id(2), id(3)),
        pre_morph: MorphPlan::Targets(targets(&[(1, 130.0)])),
        post_morph: vec![],
        morph_rate: 0.2,
    };
    let out = run_script(&triangle(), &[triangle_op(), infeasible], &cfg);
    let (idx, _) = out.failure.as_ref().unwrap();
    assert_eq!(*idx, 1);
    assert_eq!(out.reports.len(), 2);
    assert!(out.reports[0].pass);
    assert_eq!(out.tree.parent_of(id(3)).unwrap().0, id(2));
    assert_eq!(out.completed(), 1);
}
