mod common;

use common::*;
use rhombot::scenario;
use rhombot_core::engine::{morphpivot, run_script};
use rhombot_core::{FrameEvent, MorphPlan, SimFrame};

#[test]
fn triangle_script_reparents_m3_to_m2() {
    let (_, tree, config) = load("triangle.toml");
    let ops = ops("triangle.script.toml", &config);
    assert!(matches!(ops[0].pre_morph, MorphPlan::Align { .. }));
    let out = run_script(&tree, &ops, &config);
    assert!(out.failure.is_none(), "{:?}", out.failure);
    assert_eq!(parent(&out.tree, 3), Some(2));
    assert_eq!(parent(&out.tree, 2), Some(1));
    for m in out.tree.modules() {
        assert!((m.theta().to_degrees() - 90.0).abs() < 1e-9);
    }
    let r = out.reports[0];
    assert!(r.position_offset < 1e-8 && r.angular_offset < 1e-8, "{r:?}");
}

#[test]
fn mu_to_f_keeps_invariants_after_every_op() {
    let (_, mut tree, config) = load("mu.toml");
    let (_, target, _) = load("f-target.toml");
    let script = ops("mu-to-f.script.toml", &config);
    assert_eq!(script.len(), 7);
    for (i, op) in script.iter().enumerate() {
        let out = morphpivot(&tree, op, &config).unwrap_or_else(|e| panic!("op {i}: {e}"));
        assert!(out.report.pass, "op {i}: {:?}", out.report);
        frame_thetas_in_limits(&out.frames).unwrap_or_else(|e| panic!("op {i}: {e}"));
        tree = out.tree;
        tree.check_invariants().unwrap_or_else(|e| panic!("op {i}: {e}"));
        assert!(!tree.is_pending());
        assert_eq!(tree.len(), 7);
        theta_limits(&tree).unwrap_or_else(|e| panic!("op {i}: {e}"));
        no_overlap(&tree).unwrap_or_else(|e| panic!("op {i}: {e}"));
    }
    let (got, want) = (adjacency(&tree), adjacency(&target));
    assert!(isomorphic(&got, &want), "{got:?} vs {want:?}");
    assert_eq!(got, want);
    // same cells in the world, not just the same graph
    let (a, b) = (tree.footprints(), target.footprints());
    for (id, pa) in &a {
        let ca = pa.vertices().iter().fold((0.0, 0.0), |s, p| (s.0 + p.x / 4.0, s.1 + p.y / 4.0));
        let cb = b[id].vertices().iter().fold((0.0, 0.0), |s, p| (s.0 + p.x / 4.0, s.1 + p.y / 4.0));
        assert!((ca.0 - cb.0).abs() < 1e-9 && (ca.1 - cb.1).abs() < 1e-9, "{id}");
    }
}

#[test]
fn mu_is_not_already_an_f() {
    let (_, mu, _) = load("mu.toml");
    let (_, f, _) = load("f-target.toml");
    assert!(!isomorphic(&adjacency(&mu), &adjacency(&f)));
}

#[test]
fn isomorphism_oracle_sanity() {
    let path = [(0, 1), (1, 2), (2, 3)].into_iter().collect();
    let relabeled = [(7, 3), (3, 5), (5, 9)].into_iter().collect();
    let star = [(0, 1), (0, 2), (0, 3)].into_iter().collect();
    assert!(isomorphic(&path, &relabeled));
    assert!(!isomorphic(&path, &star));
}

#[test]
fn empty_script_leaves_the_scenario_unchanged() {
    let (doc, tree, config) = load("square.toml");
    let out = run_script(&tree, &ops("empty.script.toml", &config), &config);
    assert!(out.failure.is_none());
    // a single frame holding the initial state
    assert_eq!(out.frames.len(), 1);
    assert_eq!(out.frames[0], SimFrame::capture(&tree, 0.0, FrameEvent::Morph));
    // connection order carries no meaning
    let sorted = |mut d: rhombot::scenario::ScenarioDoc| {
        d.connections.sort_by_key(|c| (c.a, c.edge_a, c.b, c.edge_b));
        d
    };
    assert_eq!(sorted(scenario::from_tree(&out.tree, doc.defaults)), sorted(doc));
}

#[test]
fn failing_op_keeps_the_completed_prefix() {
    let (_, tree, config) = load("mu.toml");
    let mut script = ops("mu-to-f.script.toml", &config);
    // the second op again after the first: its edges are already used
    let dup = script[1].clone();
    script.insert(2, dup);
    let out = run_script(&tree, &script, &config);
    let (index, _) = out.failure.as_ref().expect("duplicate connect must fail");
    let index = *index;
    assert_eq!(index, 2);
    assert_eq!(out.completed(), 2);
    let prefix = run_script(&tree, &script[..2], &config);
    assert_eq!(out.tree, prefix.tree);
}
