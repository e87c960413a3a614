//! Planar rigid transforms and convex polygon overlap.

use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{atan2, cos, remainder, sin, sqrt};
use thiserror::Error;

/// Collinearity / degeneracy tolerance in meters.
pub const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("degenerate polygon (signed area {0:.3e})")]
    Degenerate(f64),
    #[error("polygon is not counterclockwise")]
    Clockwise,
    #[error("polygon is not strictly convex at vertex {0}")]
    NotConvex(usize),
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let r = remainder(angle, 2.0 * PI);
    if r <= -PI {
        r + 2.0 * PI
    } else if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

pub fn deg(degrees: f64) -> f64 {
    degrees.to_radians()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        sqrt(self.dot(self))
    }

    pub fn distance(self, o: Point2) -> f64 {
        self.sub(o).norm()
    }

    pub fn midpoint(self, o: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + o.x), 0.5 * (self.y + o.y))
    }
}

/// A planar rigid transform. `yaw` is kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2 {
    pub yaw: f64,
    pub x: f64,
    pub y: f64,
}

impl Default for Pose2 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        yaw: 0.0,
        x: 0.0,
        y: 0.0,
    };

    pub fn new(yaw: f64, x: f64, y: f64) -> Self {
        Self {
            yaw: normalize_angle(yaw),
            x,
            y,
        }
    }

    pub fn translation(x: f64, y: f64) -> Self {
        Self::new(0.0, x, y)
    }

    pub fn rotation(yaw: f64) -> Self {
        Self::new(yaw, 0.0, 0.0)
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// `self * other`: `other` expressed in this frame.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = (sin(self.yaw), cos(self.yaw));
        Pose2::new(
            self.yaw + other.yaw,
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
        )
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = (sin(self.yaw), cos(self.yaw));
        Pose2::new(
            -self.yaw,
            -(c * self.x + s * self.y),
            s * self.x - c * self.y,
        )
    }

    pub fn transform_point(&self, p: Point2) -> Point2 {
        let (s, c) = (sin(self.yaw), cos(self.yaw));
        Point2::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }

    /// Largest absolute component difference, with yaw compared on the circle.
    pub fn max_abs_diff(&self, other: &Pose2) -> f64 {
        let dyaw = normalize_angle(self.yaw - other.yaw).abs();
        dyaw.max((self.x - other.x).abs()).max((self.y - other.y).abs())
    }

    /// Homogeneous 3x3 form, row major.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let (s, c) = (sin(self.yaw), cos(self.yaw));
        [[c, -s, self.x], [s, c, self.y], [0.0, 0.0, 1.0]]
    }

    pub fn from_matrix(m: &[[f64; 3]; 3]) -> Pose2 {
        Pose2::new(atan2(m[1][0], m[0][0]), m[0][2], m[1][2])
    }
}

pub fn compose(a: &Pose2, b: &Pose2) -> Pose2 {
    a.compose(b)
}

pub fn invert(p: &Pose2) -> Pose2 {
    p.inverse()
}

fn signed_area(v: &[Point2]) -> f64 {
    let n = v.len();
    (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>() * 0.5
}

/// A counterclockwise, strictly convex polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPoly {
    vertices: Vec<Point2>,
}

impl ConvexPoly {
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        let area = signed_area(&vertices);
        if area.abs() <= GEOM_EPS * GEOM_EPS {
            return Err(GeometryError::Degenerate(area));
        }
        if area < 0.0 {
            return Err(GeometryError::Clockwise);
        }
        for i in 0..n {
            let prev = vertices[(i + n - 1) % n];
            let cur = vertices[i];
            let next = vertices[(i + 1) % n];
            let e_in = cur.sub(prev);
            let e_out = next.sub(cur);
            let len = e_in.norm();
            // distance of `next` from the supporting line of the incoming edge
            if len <= GEOM_EPS || e_in.cross(e_out) / len <= GEOM_EPS {
                return Err(GeometryError::NotConvex(i));
            }
        }
        Ok(Self { vertices })
    }

    /// Skips the convexity scan. Callers guarantee CCW vertex order.
    pub(crate) fn from_ccw(vertices: Vec<Point2>) -> Self {
        Self { vertices }
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn translate(&self, d: Point2) -> ConvexPoly {
        ConvexPoly::from_ccw(self.vertices.iter().map(|v| v.add(d)).collect())
    }

    pub fn transform(&self, pose: &Pose2) -> ConvexPoly {
        ConvexPoly::from_ccw(
            self.vertices
                .iter()
                .map(|v| pose.transform_point(*v))
                .collect(),
        )
    }

    /// Strict interior containment with a margin.
    pub fn contains_interior(&self, p: Point2, margin: f64) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = b.sub(a);
            e.cross(p.sub(a)) / e.norm() > margin
        })
    }

    /// Inward offset of every edge by `d`. `None` once the polygon vanishes.
    fn eroded(&self, d: f64) -> Option<ConvexPoly> {
        if d <= 0.0 {
            return Some(self.clone());
        }
        let v = &self.vertices;
        let n = v.len();
        let lines: Vec<(Point2, Point2)> = (0..n)
            .map(|i| {
                let a = v[i];
                let e = v[(i + 1) % n].sub(a);
                let len = e.norm();
                let dir = e.scale(1.0 / len);
                let inward = Point2::new(-dir.y, dir.x);
                (a.add(inward.scale(d)), dir)
            })
            .collect();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let (p0, d0) = lines[(i + n - 1) % n];
            let (p1, d1) = lines[i];
            let denom = d0.cross(d1);
            if denom.abs() <= GEOM_EPS {
                return None;
            }
            let t = p1.sub(p0).cross(d1) / denom;
            out.push(p0.add(d0.scale(t)));
        }
        // an edge that flipped direction means the offset consumed it
        for i in 0..n {
            let e_new = out[(i + 1) % n].sub(out[i]);
            if e_new.dot(lines[i].1) <= GEOM_EPS {
                return None;
            }
        }
        Some(ConvexPoly::from_ccw(out))
    }

    fn project(&self, axis: Point2) -> (f64, f64) {
        self.vertices
            .iter()
            .map(|v| v.dot(axis))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p), hi.max(p))
            })
    }

    fn edge_normals(&self) -> impl Iterator<Item = Point2> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| {
            let e = self.vertices[(i + 1) % n].sub(self.vertices[i]);
            let len = e.norm();
            Point2::new(e.y / len, -e.x / len)
        })
    }
}

/// True iff the interiors of `a` and `b`, each eroded by `clearance / 2`,
/// intersect by more than [`GEOM_EPS`] along every separating-axis
/// candidate. Edge contact alone is not overlap.
pub fn poly_overlap(a: &ConvexPoly, b: &ConvexPoly, clearance: f64) -> Result<bool, GeometryError> {
    for p in [a, b] {
        let area = p.area();
        if p.vertices.len() < 3 || area <= GEOM_EPS * GEOM_EPS {
            return Err(GeometryError::Degenerate(area));
        }
    }
    let half = 0.5 * clearance.max(0.0);
    let (Some(a), Some(b)) = (a.eroded(half), b.eroded(half)) else {
        return Ok(false);
    };
    for axis in a.edge_normals().chain(b.edge_normals()) {
        let (alo, ahi) = a.project(axis);
        let (blo, bhi) = b.project(axis);
        if ahi.min(bhi) - alo.max(blo) <= GEOM_EPS {
            return Ok(false);
        }
    }
    Ok(true)
}
