//! Independent constructions checked against the library's kinematics.

mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rhombot_core::geometry::{deg, normalize_angle, poly_overlap};
use rhombot_core::kinematics::{
    center_transform, edge_transform, footprint, forward_kinematics, local_vertices, remap_sigma,
};
use rhombot_core::{ConvexPoly, EdgeIndex, ModuleParams, ModuleState, Point2, Pose2};

/// Builds the rhombus by walking its sides: start at A, side vectors of
/// length 2a at headings 0, sigma, pi, pi + sigma.
fn walked_vertices(a: f64, sigma: f64) -> [Point2; 4] {
    let side = 2.0 * a;
    let headings = [0.0, sigma, std::f64::consts::PI, std::f64::consts::PI + sigma];
    let mut p = Point2::new(-a, 0.0);
    let mut out = [p; 4];
    for (i, h) in headings.iter().take(3).enumerate() {
        p = Point2::new(p.x + side * h.cos(), p.y + side * h.sin());
        out[i + 1] = p;
    }
    out
}

/// Edge frame from vertices: midpoint, +x along the counterclockwise edge
/// direction reversed (so +y points outward for a ccw polygon).
fn oracle_edge_frame(v: &[Point2; 4], k: usize) -> Pose2 {
    let (p, q) = (v[k], v[(k + 1) % 4]);
    let mid = p.midpoint(q);
    // outward normal of a ccw edge p->q is (dy, -dx); frame x axis is normal rotated -90
    let d = q.sub(p);
    let normal_yaw = (-d.x).atan2(d.y);
    Pose2::new(normal_yaw - std::f64::consts::FRAC_PI_2, mid.x, mid.y)
}

#[test]
fn edge_transform_matches_vertex_construction() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    for _ in 0..1000 {
        let sigma = rng.random_range(deg(45.0)..deg(135.0));
        let s = ModuleState::with_sigma(id(0), sigma, ModuleParams::default());
        let v = walked_vertices(A, sigma);
        for (i, lv) in local_vertices(&s).iter().enumerate() {
            assert!(lv.distance(v[i]) < 1e-12);
        }
        for k in 1..4u8 {
            let got = edge_transform(&s, EdgeIndex::new(k).unwrap());
            let want = oracle_edge_frame(&v, k as usize);
            assert!((got.x - want.x).abs() < 1e-12 && (got.y - want.y).abs() < 1e-12);
            assert!(normalize_angle(got.yaw - want.yaw).abs() < 1e-12, "k={k} sigma={sigma}");
        }
    }
}

#[test]
fn chained_footprints_share_edges() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.random_range(1..6);
        let chain: Vec<(ModuleState, EdgeIndex)> = (0..n)
            .map(|i| {
                let s = ModuleState::with_sigma(id(i), rng.random_range(deg(45.0)..deg(135.0)), ModuleParams::default());
                (s, EdgeIndex::new(rng.random_range(1..4)).unwrap())
            })
            .collect();
        let mut frame = Pose2::IDENTITY;
        for (i, (s, k)) in chain.iter().enumerate() {
            let prev = footprint(s, &frame);
            let next_frame = frame.compose(&edge_transform(s, *k));
            assert!(next_frame.max_abs_diff(&forward_kinematics(&chain[..=i])) < 1e-12);
            // the next module's E0 (A..B) lies on this module's edge k, reversed
            let kk = k.value() as usize;
            let (p, q) = (prev.vertices()[kk], prev.vertices()[(kk + 1) % 4]);
            let a = next_frame.transform_point(Point2::new(-A, 0.0));
            let b = next_frame.transform_point(Point2::new(A, 0.0));
            assert!(a.distance(q) < 1e-12 && b.distance(p) < 1e-12);
            frame = next_frame;
        }
    }
}

#[test]
fn remap_keeps_the_footprint() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    for _ in 0..500 {
        let s = ModuleState::with_sigma(id(0), rng.random_range(deg(45.0)..deg(135.0)), ModuleParams::default());
        let base = footprint(&s, &Pose2::IDENTITY);
        for k in EdgeIndex::ALL {
            let r = remap_sigma(&s, k);
            let frame = rhombot_core::kinematics::relabel_frame(&s, k);
            let moved = footprint(&r, &frame);
            for v in moved.vertices() {
                assert!(base.vertices().iter().any(|w| w.distance(*v) < 1e-12));
            }
            assert!((r.theta() - s.theta()).abs() < 1e-12, "theta is physical");
        }
    }
}

#[test]
fn center_composed_twice_is_the_opposite_edge() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    for _ in 0..1000 {
        let s = ModuleState::with_sigma(id(0), rng.random_range(deg(45.0)..deg(135.0)), ModuleParams::default());
        let c = center_transform(&s);
        assert!(c.compose(&c).max_abs_diff(&edge_transform(&s, EdgeIndex::E2)) < 1e-15);
    }
}

fn pose() -> impl Strategy<Value = Pose2> {
    (-3.2f64..3.2, -5.0f64..5.0, -5.0f64..5.0).prop_map(|(t, x, y)| Pose2::new(t, x, y))
}

fn close(a: &Pose2, b: &Pose2) -> bool {
    normalize_angle(a.yaw - b.yaw).abs() < 1e-12 && (a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12
}

proptest! {
    #[test]
    fn compose_is_associative(p in pose(), q in pose(), r in pose()) {
        prop_assert!(close(&p.compose(&q).compose(&r), &p.compose(&q.compose(&r))));
    }

    #[test]
    fn inverse_cancels(p in pose()) {
        prop_assert!(close(&p.compose(&p.inverse()), &Pose2::IDENTITY));
        prop_assert!(close(&p.inverse().compose(&p), &Pose2::IDENTITY));
    }

    #[test]
    fn overlap_is_symmetric_and_rigid(
        s1 in deg(45.0)..deg(135.0), s2 in deg(45.0)..deg(135.0),
        p in pose(), q in (-3.2f64..3.2, -0.5f64..0.5, -0.5f64..0.5), g in pose(),
    ) {
        let m1 = ModuleState::with_sigma(id(0), s1, ModuleParams::default());
        let m2 = ModuleState::with_sigma(id(1), s2, ModuleParams::default());
        let rel = Pose2::new(q.0, q.1, q.2);
        let a = footprint(&m1, &p);
        let b = footprint(&m2, &p.compose(&rel));
        let ab = poly_overlap(&a, &b, 0.0).unwrap();
        prop_assert_eq!(ab, poly_overlap(&b, &a, 0.0).unwrap());
        // a rigid motion of both leaves the verdict alone
        let (ga, gb) = (a.transform(&g), b.transform(&g));
        prop_assert_eq!(ab, poly_overlap(&ga, &gb, 0.0).unwrap());
        // a vertex strictly inside the other polygon means overlap
        let inside = b.vertices().iter().any(|v| a.contains_interior(*v, 1e-6))
            || a.vertices().iter().any(|v| b.contains_interior(*v, 1e-6));
        if inside { prop_assert!(ab); }
    }

    #[test]
    fn squares_overlap_iff_projections_do(dx in -0.6f64..0.6, dy in -0.6f64..0.6) {
        let sq = |x: f64, y: f64| ConvexPoly::new(vec![
            Point2::new(x, y), Point2::new(x + 0.28, y), Point2::new(x + 0.28, y + 0.28), Point2::new(x, y + 0.28),
        ]).unwrap();
        let want = dx.abs() < 0.28 - 1e-9 && dy.abs() < 0.28 - 1e-9;
        prop_assert_eq!(poly_overlap(&sq(0.0, 0.0), &sq(dx, dy), 0.0).unwrap(), want);
    }
}
