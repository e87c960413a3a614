#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rhombot::scenario::{self, ScenarioDoc};
use rhombot::script;
use rhombot_core::geometry::poly_overlap;
use rhombot_core::{EngineConfig, KTree, ModuleId, MorphPivotOp, SimFrame};

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn text(name: &str) -> String {
    std::fs::read_to_string(scenarios_dir().join(name)).unwrap()
}

pub fn load(name: &str) -> (ScenarioDoc, KTree, EngineConfig) {
    let doc = scenario::parse_scenario(&text(name)).unwrap();
    let tree = scenario::to_tree(&doc).unwrap();
    let config = doc.defaults.to_config();
    (doc, tree, config)
}

pub fn ops(name: &str, config: &EngineConfig) -> Vec<MorphPivotOp> {
    script::parse_script(&text(name)).unwrap().to_ops(config.morph_rate).unwrap()
}

/// Scenario files in the corpus (scripts excluded).
pub fn corpus() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(scenarios_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".toml") && !n.contains(".script."))
        .collect();
    names.sort();
    names
}

/// Undirected module adjacency.
pub fn adjacency(tree: &KTree) -> BTreeSet<(u32, u32)> {
    tree.adjacency()
        .into_iter()
        .map(|(a, b)| (a.0.min(b.0), a.0.max(b.0)))
        .collect()
}

/// Brute-force graph isomorphism over vertex permutations. Small graphs only.
pub fn isomorphic(a: &BTreeSet<(u32, u32)>, b: &BTreeSet<(u32, u32)>) -> bool {
    let norm = |g: &BTreeSet<(u32, u32)>| -> BTreeSet<(u32, u32)> {
        g.iter().map(|&(x, y)| (x.min(y), x.max(y))).collect()
    };
    let (a, b) = (&norm(a), &norm(b));
    let verts = |g: &BTreeSet<(u32, u32)>| -> Vec<u32> {
        g.iter().flat_map(|&(x, y)| [x, y]).collect::<BTreeSet<_>>().into_iter().collect()
    };
    let (va, vb) = (verts(a), verts(b));
    if va.len() != vb.len() || a.len() != b.len() {
        return false;
    }
    let degrees = |g: &BTreeSet<(u32, u32)>, v: &[u32]| {
        let mut d: Vec<usize> = v.iter().map(|x| g.iter().filter(|e| e.0 == *x || e.1 == *x).count()).collect();
        d.sort();
        d
    };
    if degrees(a, &va) != degrees(b, &vb) {
        return false;
    }
    let mut perm: Vec<usize> = (0..vb.len()).collect();
    loop {
        let map: BTreeMap<u32, u32> = va.iter().zip(&perm).map(|(x, i)| (*x, vb[*i])).collect();
        if a.iter().all(|(x, y)| {
            let (p, q) = (map[x], map[y]);
            b.contains(&(p.min(q), p.max(q)))
        }) {
            return true;
        }
        if !next_permutation(&mut perm) {
            return false;
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Every pair of footprints, connected or not, is interior-disjoint.
pub fn no_overlap(tree: &KTree) -> Result<(), String> {
    let fps: Vec<_> = tree.footprints().into_iter().collect();
    for (i, (a, pa)) in fps.iter().enumerate() {
        for (b, pb) in &fps[i + 1..] {
            if poly_overlap(pa, pb, 0.0).map_err(|e| e.to_string())? {
                return Err(format!("{a} overlaps {b}"));
            }
        }
    }
    Ok(())
}

pub fn theta_limits(tree: &KTree) -> Result<(), String> {
    for m in tree.modules() {
        if !m.params.theta_in_range(m.theta()) {
            return Err(format!("{} at {:.6} deg", m.id, m.theta().to_degrees()));
        }
    }
    Ok(())
}

pub fn frame_thetas_in_limits(frames: &[SimFrame]) -> Result<(), String> {
    for f in frames {
        for m in &f.modules {
            if !m.state.params.theta_in_range(m.state.theta()) {
                return Err(format!("{} at t={} s: {:.6} deg", m.state.id, f.time, m.state.theta().to_degrees()));
            }
        }
    }
    Ok(())
}

pub fn parent(tree: &KTree, id: u32) -> Option<u32> {
    tree.parent_of(ModuleId(id)).map(|(p, _)| p.0)
}
