//! Kinematic model of a single rhombus module.
//!
//! Frame `{O_i}` of a module sits at the midpoint of its reference edge E0,
//! with +y pointing at the module center. With half side length `a` and
//! folding parameter `sigma` (the interior angle between E0 and E3) the
//! vertices are
//!
//! ```text
//! A = (-a, 0)                      B = (a, 0)
//! C = (a + 2a cos s, 2a sin s)     D = (-a + 2a cos s, 2a sin s)
//! ```
//!
//! and the edges run counterclockwise: E0 = AB, E1 = BC, E2 = CD, E3 = DA.
//! The frame of edge `k` sits at its midpoint with +y pointing out of the
//! module, so it is exactly the E0 frame of a module attached at that edge.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use libm::{cos, sin};
use thiserror::Error;

use crate::geometry::{ConvexPoly, Point2, Pose2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("edge index {0} out of range 0..=3")]
    InvalidEdge(u8),
    #[error("{module}: theta {theta_deg:.4} deg outside [{min_deg:.4}, {max_deg:.4}]")]
    ThetaOutOfRange {
        module: ModuleId,
        theta_deg: f64,
        min_deg: f64,
        max_deg: f64,
    },
    #[error("invalid module parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModuleId(pub u32);

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.0)
    }
}

/// Edge label in `{0, 1, 2, 3}`, counterclockwise from E0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeIndex(u8);

impl EdgeIndex {
    pub const E0: EdgeIndex = EdgeIndex(0);
    pub const E1: EdgeIndex = EdgeIndex(1);
    pub const E2: EdgeIndex = EdgeIndex(2);
    pub const E3: EdgeIndex = EdgeIndex(3);
    pub const ALL: [EdgeIndex; 4] = [Self::E0, Self::E1, Self::E2, Self::E3];

    pub fn new(value: u8) -> Result<Self, KinematicsError> {
        if value < 4 {
            Ok(EdgeIndex(value))
        } else {
            Err(KinematicsError::InvalidEdge(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// `(self + k) mod 4`
    pub fn offset(self, k: u8) -> EdgeIndex {
        EdgeIndex((self.0 + k % 4) % 4)
    }

    /// `(self - k) mod 4`
    pub fn back(self, k: u8) -> EdgeIndex {
        EdgeIndex((self.0 + 4 - k % 4) % 4)
    }

    pub fn is_adjacent_to_e0(self) -> bool {
        self.0 % 2 == 1
    }
}

impl fmt::Display for EdgeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "E{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleParams {
    /// Half of the rhombus side length, meters.
    pub a: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl Default for ModuleParams {
    fn default() -> Self {
        Self {
            a: 0.140,
            theta_min: 45f64.to_radians(),
            theta_max: 135f64.to_radians(),
        }
    }
}

impl ModuleParams {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(KinematicsError::InvalidParams("a must be positive"));
        }
        if !(0.0 < self.theta_min && self.theta_min < self.theta_max && self.theta_max < PI) {
            return Err(KinematicsError::InvalidParams(
                "theta limits must satisfy 0 < min < max < pi",
            ));
        }
        Ok(())
    }

    pub fn theta_in_range(&self, theta: f64) -> bool {
        // 1e-12 slack so targets given in degrees survive the conversion
        theta >= self.theta_min - 1e-12 && theta <= self.theta_max + 1e-12
    }
}

/// Whether `sigma` equals the physical folding angle (`Even`) or its
/// supplement (`Odd`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sigma_from_theta(self, theta: f64) -> f64 {
        match self {
            Parity::Even => theta,
            Parity::Odd => PI - theta,
        }
    }

    pub fn theta_from_sigma(self, sigma: f64) -> f64 {
        // the map is an involution
        self.sigma_from_theta(sigma)
    }

    /// d(sigma)/d(theta)
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// One module. Edges are also tracked in the module's physical labeling
/// (the labeling it was declared with): `e0` is the physical index of the
/// current E0, so current label `k` is physical edge `k + e0 (mod 4)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleState {
    pub id: ModuleId,
    pub sigma: f64,
    pub e0: EdgeIndex,
    pub params: ModuleParams,
}

impl ModuleState {
    /// A module in its physical labeling, so `sigma == theta`.
    pub fn new(id: ModuleId, theta: f64, params: ModuleParams) -> Result<Self, KinematicsError> {
        params.validate()?;
        let s = Self {
            id,
            sigma: theta,
            e0: EdgeIndex::E0,
            params,
        };
        s.check_limits()?;
        Ok(s)
    }

    pub fn with_sigma(id: ModuleId, sigma: f64, params: ModuleParams) -> Self {
        Self {
            id,
            sigma,
            e0: EdgeIndex::E0,
            params,
        }
    }

    pub fn parity(&self) -> Parity {
        if self.e0.is_adjacent_to_e0() {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    pub fn theta(&self) -> f64 {
        self.parity().theta_from_sigma(self.sigma)
    }

    pub fn set_theta(&mut self, theta: f64) {
        self.sigma = self.parity().sigma_from_theta(theta);
    }

    pub fn check_limits(&self) -> Result<(), KinematicsError> {
        let theta = self.theta();
        if self.params.theta_in_range(theta) {
            Ok(())
        } else {
            Err(KinematicsError::ThetaOutOfRange {
                module: self.id,
                theta_deg: theta.to_degrees(),
                min_deg: self.params.theta_min.to_degrees(),
                max_deg: self.params.theta_max.to_degrees(),
            })
        }
    }

    /// Current label of a physical edge.
    pub fn label_of(&self, physical: EdgeIndex) -> EdgeIndex {
        physical.back(self.e0.value())
    }

    /// Physical edge carrying a current label.
    pub fn physical_of(&self, label: EdgeIndex) -> EdgeIndex {
        label.offset(self.e0.value())
    }

    pub fn a(&self) -> f64 {
        self.params.a
    }
}

/// Vertices A, B, C, D in the module frame.
pub fn local_vertices(state: &ModuleState) -> [Point2; 4] {
    let a = state.params.a;
    let (s, c) = (sin(state.sigma), cos(state.sigma));
    [
        Point2::new(-a, 0.0),
        Point2::new(a, 0.0),
        Point2::new(a + 2.0 * a * c, 2.0 * a * s),
        Point2::new(-a + 2.0 * a * c, 2.0 * a * s),
    ]
}

/// Pose of edge `k`'s frame in the module frame. `k = 0` is the identity.
pub fn edge_transform(state: &ModuleState, k: EdgeIndex) -> Pose2 {
    let a = state.params.a;
    let sg = state.sigma;
    let (s, c) = (sin(sg), cos(sg));
    match k.value() {
        0 => Pose2::IDENTITY,
        1 => Pose2::new(sg + PI, a + a * c, a * s),
        2 => Pose2::new(0.0, 2.0 * a * c, 2.0 * a * s),
        // the x term is -a + a cos(sigma): midpoint of D and A
        _ => Pose2::new(sg, -a + a * c, a * s),
    }
}

/// Derivative of [`edge_transform`] with respect to sigma, as
/// `(d yaw, d x, d y)`.
pub fn edge_transform_derivative(state: &ModuleState, k: EdgeIndex) -> (f64, f64, f64) {
    let a = state.params.a;
    let (s, c) = (sin(state.sigma), cos(state.sigma));
    match k.value() {
        0 => (0.0, 0.0, 0.0),
        1 => (1.0, -a * s, a * c),
        2 => (0.0, -2.0 * a * s, 2.0 * a * c),
        _ => (1.0, -a * s, a * c),
    }
}

/// Outward frame of edge `k`: midpoint, +y away from the module. Equals
/// [`edge_transform`] except on E0, where it is the E0 frame turned by pi.
pub fn outward_edge_frame(state: &ModuleState, k: EdgeIndex) -> Pose2 {
    if k == EdgeIndex::E0 {
        Pose2::rotation(PI)
    } else {
        edge_transform(state, k)
    }
}

/// Transform from E0 to the module center.
pub fn center_transform(state: &ModuleState) -> Pose2 {
    let a = state.params.a;
    Pose2::new(0.0, a * cos(state.sigma), a * sin(state.sigma))
}

pub fn center_transform_derivative(state: &ModuleState) -> (f64, f64, f64) {
    let a = state.params.a;
    (0.0, -a * sin(state.sigma), a * cos(state.sigma))
}

/// World footprint: the four vertices mapped through `frame`.
pub fn footprint(state: &ModuleState, frame: &Pose2) -> ConvexPoly {
    let v = local_vertices(state);
    ConvexPoly::from_ccw(v.iter().map(|p| frame.transform_point(*p)).collect())
}

/// Frame of the relabeled module (E0 moved to current edge `new_e0`)
/// expressed in the current module frame.
pub fn relabel_frame(state: &ModuleState, new_e0: EdgeIndex) -> Pose2 {
    if new_e0 == EdgeIndex::E0 {
        Pose2::IDENTITY
    } else {
        edge_transform(state, new_e0).compose(&Pose2::rotation(PI))
    }
}

/// Relabels edges counterclockwise starting from `new_e0`. Opposite edges
/// keep sigma, adjacent edges take its supplement.
pub fn remap_sigma(state: &ModuleState, new_e0: EdgeIndex) -> ModuleState {
    let sigma = if new_e0.is_adjacent_to_e0() {
        PI - state.sigma
    } else {
        state.sigma
    };
    ModuleState {
        sigma,
        e0: state.e0.offset(new_e0.value()),
        ..*state
    }
}

/// Composes the edge transforms of a chain `(module, interface)` from the
/// base frame to the end frame. An empty chain is the identity.
pub fn forward_kinematics(chain: &[(ModuleState, EdgeIndex)]) -> Pose2 {
    chain
        .iter()
        .fold(Pose2::IDENTITY, |acc, (state, k)| acc.compose(&edge_transform(state, *k)))
}

/// Vertex C (the E1/E2 corner) of the module in its own frame.
pub fn e1_e2_vertex(state: &ModuleState) -> Point2 {
    local_vertices(state)[2]
}

/// World footprints for a list of `(state, frame)` pairs.
pub fn footprints<'a, I>(items: I) -> Vec<ConvexPoly>
where
    I: IntoIterator<Item = (&'a ModuleState, &'a Pose2)>,
{
    items.into_iter().map(|(s, f)| footprint(s, f)).collect()
}
