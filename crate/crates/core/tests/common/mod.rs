#![allow(dead_code)]

use rhombot_core::geometry::deg;
use rhombot_core::{EdgeIndex, EdgeRef, KTree, ModuleId, ModuleParams, ModuleState, Pose2, Tolerances};

pub const A: f64 = 0.14;

pub fn id(n: u32) -> ModuleId {
    ModuleId(n)
}

pub fn e(n: u32, k: u8) -> EdgeRef {
    EdgeRef::new(ModuleId(n), EdgeIndex::new(k).unwrap())
}

pub fn module(n: u32, theta_deg: f64) -> ModuleState {
    ModuleState::new(ModuleId(n), deg(theta_deg), ModuleParams::default()).unwrap()
}

/// 2x2 block: M0 root, M1 above, M2 above-right, M3 right; M2-M3 closes
/// the loop.
pub fn square() -> KTree {
    KTree::initialize(
        (0..4).map(|n| module(n, 90.0)).collect(),
        &[
            (e(0, 2), e(1, 0)),
            (e(1, 1), e(2, 0)),
            (e(2, 1), e(3, 3)),
            (e(0, 1), e(3, 0)),
        ],
        id(0),
        Pose2::IDENTITY,
        &Tolerances::default(),
    )
    .unwrap()
}

/// Three squares around the top-right corner of M1, leaving a 90 degree
/// gap between M3's E3 and M2's E0.
pub fn triangle() -> KTree {
    KTree::initialize(
        (1..=3).map(|n| module(n, 90.0)).collect(),
        &[(e(1, 2), e(2, 3)), (e(1, 1), e(3, 0))],
        id(1),
        Pose2::IDENTITY,
        &Tolerances::default(),
    )
    .unwrap()
}

/// Straight chain of `n` squares along +y, each attached at the previous
/// module's E2.
pub fn chain(n: u32, theta_deg: f64) -> KTree {
    let cons: Vec<_> = (1..n).map(|i| (e(i - 1, 2), e(i, 0))).collect();
    KTree::initialize(
        (0..n).map(|i| module(i, theta_deg)).collect(),
        &cons,
        id(0),
        Pose2::IDENTITY,
        &Tolerances::default(),
    )
    .unwrap()
}
