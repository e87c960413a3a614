//! Simulation core for planar rhombus modules with a single folding degree of
//! freedom.
//!
//! - [`geometry`]: planar rigid transforms and convex footprint overlap
//! - [`kinematics`]: edge frames of a module, forward kinematics, remapping
//!   of the folding parameter when the reference edge changes
//! - [`closure`]: closed-loop residuals and a damped least-squares solver
//! - [`topology`]: the rooted kinematic tree plus loop connections
//! - [`engine`]: morphpivoting (morph, connect, disconnect, morph) and
//!   script execution
//! - [`actuation`]: drive torque, connector torque and cable/servo models
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod actuation;
pub mod closure;
pub mod engine;
pub mod geometry;
pub mod kinematics;
mod linalg;
pub mod topology;

pub use actuation::{ActuationParams, Direction, StrokeCounts, StrokeModel};
pub use closure::{Closure, Coupling, KinematicLoop, LoopError, LoopSolution};
pub use engine::{
    DockingReport, EngineConfig, EngineError, FrameEvent, ModuleFrame, MorphMode, MorphPivotOp,
    MorphPlan, MorphTarget, PivotOutcome, ScriptOutcome, SimFrame, Stage,
};
pub use geometry::{ConvexPoly, GeometryError, Point2, Pose2};
pub use kinematics::{EdgeIndex, KinematicsError, ModuleId, ModuleParams, ModuleState, Parity};
pub use topology::{Connection, ConnectionKind, EdgeRef, KTree, Tolerances, TopologyError};
