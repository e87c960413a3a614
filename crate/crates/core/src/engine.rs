//! Morphpivoting: morph, connect, disconnect, morph.
//!
//! Morphing ramps folding angles linearly and emits one [`SimFrame`] per
//! time step. Every frame is checked for footprint overlap between modules
//! that do not share a connection, and for loop connections drifting apart.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use libm::ceil;
use thiserror::Error;

use crate::closure::{solve_loop, Coupling, LoopError, LoopSolution};
use crate::geometry::{poly_overlap, GeometryError, Pose2};
use crate::kinematics::{KinematicsError, ModuleId, ModuleState};
use crate::topology::{Connection, EdgeRef, KTree, Tolerances, TopologyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphMode {
    /// One order group at a time, ascending.
    Sequential,
    /// All targets ramp together.
    Simultaneous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub tolerances: Tolerances,
    /// Default ramp rate, rad/s.
    pub morph_rate: f64,
    /// Frame period, s.
    pub dt: f64,
    /// Footprint clearance for the overlap check, m.
    pub clearance: f64,
    pub mode: MorphMode,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            morph_rate: 0.2,
            dt: 0.05,
            clearance: 0.0,
            mode: MorphMode::Sequential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorphTarget {
    pub module: ModuleId,
    /// Folding angle theta, radians.
    pub theta: f64,
    pub order: u32,
}

/// Pre-morph targets, either explicit or solved at execution time so the
/// new connection's edges meet.
#[derive(Debug, Clone, PartialEq)]
pub enum MorphPlan {
    Targets(Vec<MorphTarget>),
    /// Modules are ramped in the listed order.
    Align {
        modules: Vec<ModuleId>,
        coupling: Coupling,
    },
}

/// One reconfiguration step. Edges in `new_con` use each module's physical
/// labeling, which does not change when the kinematic tree is rebuilt.
#[derive(Debug, Clone, PartialEq)]
pub struct MorphPivotOp {
    pub new_con: (EdgeRef, EdgeRef),
    pub new_discon: (ModuleId, ModuleId),
    pub pre_morph: MorphPlan,
    pub post_morph: Vec<MorphTarget>,
    /// rad/s
    pub morph_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameEvent {
    Morph,
    Connect,
    Disconnect,
    Reparent,
}

impl FrameEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            FrameEvent::Morph => "morph",
            FrameEvent::Connect => "connect",
            FrameEvent::Disconnect => "disconnect",
            FrameEvent::Reparent => "reparent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleFrame {
    pub state: ModuleState,
    /// World pose of the module's current E0 frame.
    pub pose: Pose2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimFrame {
    pub time: f64,
    pub modules: Vec<ModuleFrame>,
    pub connections: Vec<Connection>,
    pub event: FrameEvent,
}

impl SimFrame {
    pub fn capture(tree: &KTree, time: f64, event: FrameEvent) -> SimFrame {
        let poses = tree.world_poses();
        SimFrame {
            time,
            modules: tree
                .modules()
                .map(|s| ModuleFrame {
                    state: *s,
                    pose: poses[&s.id],
                })
                .collect(),
            connections: tree.connections(),
            event,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DockingReport {
    /// Distance between the two edge midpoints, m.
    pub position_offset: f64,
    /// Deviation of the relative edge yaw from pi, rad.
    pub angular_offset: f64,
    pub pass: bool,
}

impl DockingReport {
    pub fn measure(tree: &KTree, x: EdgeRef, y: EdgeRef, tol: &Tolerances) -> Result<Self, TopologyError> {
        let (p, a) = tree.edge_alignment(x, y)?;
        Ok(Self {
            position_offset: p,
            angular_offset: a,
            pass: p <= tol.position && a <= tol.angle,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Plan,
    PreMorph,
    Docking,
    Connect,
    Disconnect,
    Reparent,
    PostMorph,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Plan => "plan",
            Stage::PreMorph => "pre-morph",
            Stage::Docking => "docking",
            Stage::Connect => "connect",
            Stage::Disconnect => "disconnect",
            Stage::Reparent => "reparent",
            Stage::PostMorph => "post-morph",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("collision between {a} and {b} at t={time:.3} s")]
    Collision { time: f64, a: ModuleId, b: ModuleId },
    #[error(
        "loop connection {a}-{b} pulled apart at t={time:.3} s \
         ({position_offset:.6} m, {angular_offset:.6} rad)"
    )]
    LoopBroken {
        time: f64,
        a: ModuleId,
        b: ModuleId,
        position_offset: f64,
        angular_offset: f64,
    },
    #[error("invalid timing: rate {rate}, dt {dt}")]
    InvalidTiming { rate: f64, dt: f64 },
    #[error(
        "docking failed: offset {:.6} m, {:.6} rad",
        .0.position_offset,
        .0.angular_offset
    )]
    DockingFailed(DockingReport),
    #[error("{stage} failed: {source}")]
    Stage {
        stage: Stage,
        source: Box<EngineError>,
    },
}

impl EngineError {
    fn at(stage: Stage) -> impl FnOnce(EngineError) -> EngineError {
        move |e| EngineError::Stage {
            stage,
            source: Box::new(e),
        }
    }

    /// The innermost error below any stage tags.
    pub fn root_cause(&self) -> &EngineError {
        match self {
            EngineError::Stage { source, .. } => source.root_cause(),
            e => e,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorphOutcome {
    pub tree: KTree,
    pub frames: Vec<SimFrame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PivotOutcome {
    pub tree: KTree,
    pub frames: Vec<SimFrame>,
    pub report: DockingReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptOutcome {
    pub tree: KTree,
    pub frames: Vec<SimFrame>,
    pub reports: Vec<DockingReport>,
    /// Index of the failing op and its error, when the script stopped early.
    pub failure: Option<(usize, EngineError)>,
}

impl ScriptOutcome {
    pub fn completed(&self) -> usize {
        self.reports.iter().filter(|r| r.pass).count()
    }
}

/// Folding angles that bring the two (physical) edges of `con` together,
/// solving the loop it closes over the folding angles of `modules`.
pub fn plan_alignment(
    tree: &KTree,
    con: (EdgeRef, EdgeRef),
    modules: &[ModuleId],
    coupling: Coupling,
) -> Result<LoopSolution, EngineError> {
    let x = tree.label_of(con.0)?;
    let y = tree.label_of(con.1)?;
    for r in [x, y] {
        if tree.occupant(r)?.is_some() {
            return Err(TopologyError::EdgeOccupied {
                module: r.module,
                edge: r.edge,
            }
            .into());
        }
    }
    if x.module == y.module {
        return Err(TopologyError::SelfConnection(x.module).into());
    }
    let lp = tree.docking_loop(x, y)?;
    Ok(solve_loop(&lp, modules, coupling)?)
}

/// Turns a solved alignment into ordered targets, ramped in `modules` order.
pub fn alignment_targets(solution: &LoopSolution, modules: &[ModuleId]) -> Vec<MorphTarget> {
    modules
        .iter()
        .enumerate()
        .filter_map(|(order, id)| {
            solution
                .thetas
                .iter()
                .find(|(m, _)| m == id)
                .map(|&(module, theta)| MorphTarget {
                    module,
                    theta,
                    order: order as u32,
                })
        })
        .collect()
}

fn check_frame(tree: &KTree, time: f64, config: &EngineConfig) -> Result<(), EngineError> {
    let prints = tree.footprints();
    let ids: Vec<ModuleId> = prints.keys().copied().collect();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            if tree.connected(*a, *b) {
                continue;
            }
            if poly_overlap(&prints[a], &prints[b], config.clearance)? {
                return Err(EngineError::Collision { time, a: *a, b: *b });
            }
        }
    }
    tree.check_loops(&config.tolerances).map_err(|e| match e {
        TopologyError::Inconsistent {
            a,
            b,
            position_offset,
            angular_offset,
        } => EngineError::LoopBroken {
            time,
            a,
            b,
            position_offset,
            angular_offset,
        },
        other => other.into(),
    })
}

/// Ramps folding angles toward `targets` at `rate` rad/s. In sequential
/// mode each order group starts when the previous one has arrived. Frames
/// start at `t = 0` with the unchanged configuration.
pub fn execute_morph(
    tree: &KTree,
    targets: &[MorphTarget],
    rate: f64,
    config: &EngineConfig,
) -> Result<MorphOutcome, EngineError> {
    if let Some(m) = tree.pending() {
        return Err(TopologyError::Pending(m).into());
    }
    if !(rate > 0.0 && rate.is_finite() && config.dt > 0.0 && config.dt.is_finite()) {
        return Err(EngineError::InvalidTiming { rate, dt: config.dt });
    }
    for t in targets {
        let mut probe = *tree.module(t.module)?;
        probe.set_theta(t.theta);
        probe.check_limits()?;
    }

    let mut groups: BTreeMap<u32, Vec<MorphTarget>> = BTreeMap::new();
    for t in targets {
        let key = match config.mode {
            MorphMode::Sequential => t.order,
            MorphMode::Simultaneous => 0,
        };
        groups.entry(key).or_default().push(*t);
    }

    let mut tree = tree.clone();
    check_frame(&tree, 0.0, config)?;
    let mut frames = alloc::vec![SimFrame::capture(&tree, 0.0, FrameEvent::Morph)];
    let mut clock = 0.0;

    for group in groups.values() {
        let starts: Vec<(ModuleId, f64, f64)> = group
            .iter()
            .map(|t| Ok((t.module, tree.module(t.module)?.theta(), t.theta)))
            .collect::<Result<_, TopologyError>>()?;
        let duration = starts
            .iter()
            .map(|(_, from, to)| (to - from).abs() / rate)
            .fold(0.0, f64::max);
        if duration <= 1e-12 {
            continue;
        }
        let steps = ceil(duration / config.dt - 1e-9).max(1.0) as usize;
        for step in 1..=steps {
            let local = if step == steps {
                duration
            } else {
                step as f64 * config.dt
            };
            for &(id, from, to) in &starts {
                let span = to - from;
                let theta = if step == steps || rate * local >= span.abs() {
                    to
                } else {
                    from + span.signum() * rate * local
                };
                tree.set_theta(id, theta)?;
            }
            let time = clock + local;
            check_frame(&tree, time, config)?;
            frames.push(SimFrame::capture(&tree, time, FrameEvent::Morph));
        }
        clock += duration;
    }
    Ok(MorphOutcome { tree, frames })
}

fn shift(frames: &mut [SimFrame], by: f64) {
    for f in frames {
        f.time += by;
    }
}

/// One morphpivot. On a failed docking check the input tree is returned
/// untouched together with the failing report.
pub fn morphpivot(
    tree: &KTree,
    op: &MorphPivotOp,
    config: &EngineConfig,
) -> Result<PivotOutcome, EngineError> {
    let targets = match &op.pre_morph {
        MorphPlan::Targets(t) => t.clone(),
        MorphPlan::Align { modules, coupling } => {
            let sol = plan_alignment(tree, op.new_con, modules, *coupling)
                .map_err(EngineError::at(Stage::Plan))?;
            alignment_targets(&sol, modules)
        }
    };
    let pre = execute_morph(tree, &targets, op.morph_rate, config)
        .map_err(EngineError::at(Stage::PreMorph))?;
    let mut frames = pre.frames;
    let mut now = frames.last().map(|f| f.time).unwrap_or(0.0);
    let morphed = pre.tree;

    let at = |t: &KTree, r: EdgeRef| t.label_of(r);
    let x = at(&morphed, op.new_con.0).map_err(|e| EngineError::at(Stage::Docking)(e.into()))?;
    let y = at(&morphed, op.new_con.1).map_err(|e| EngineError::at(Stage::Docking)(e.into()))?;
    let report = DockingReport::measure(&morphed, x, y, &config.tolerances)
        .map_err(|e| EngineError::at(Stage::Docking)(e.into()))?;
    if !report.pass {
        return Ok(PivotOutcome {
            tree: tree.clone(),
            frames,
            report,
        });
    }

    let connected = morphed
        .connect(x, y, &config.tolerances)
        .map_err(|e| EngineError::at(Stage::Connect)(e.into()))?;
    frames.push(SimFrame::capture(&connected, now, FrameEvent::Connect));

    let (da, db) = op.new_discon;
    let mut current = connected
        .disconnect(da, db)
        .map_err(|e| EngineError::at(Stage::Disconnect)(e.into()))?;
    frames.push(SimFrame::capture(&current, now, FrameEvent::Disconnect));

    if let Some(child) = current.pending() {
        current = current
            .assign_new_parent(child)
            .map_err(|e| EngineError::at(Stage::Reparent)(e.into()))?;
        frames.push(SimFrame::capture(&current, now, FrameEvent::Reparent));
    }

    let post = execute_morph(&current, &op.post_morph, op.morph_rate, config)
        .map_err(EngineError::at(Stage::PostMorph))?;
    let mut post_frames = post.frames;
    // the first post frame repeats the reparented state
    post_frames.remove(0);
    shift(&mut post_frames, now);
    if let Some(last) = post_frames.last() {
        now = last.time;
    }
    let _ = now;
    frames.extend(post_frames);

    Ok(PivotOutcome {
        tree: post.tree,
        frames,
        report,
    })
}

/// Runs ops in order and stops at the first failure (including a failed
/// docking check), keeping everything completed before it.
pub fn run_script(tree: &KTree, script: &[MorphPivotOp], config: &EngineConfig) -> ScriptOutcome {
    let mut current = tree.clone();
    let mut frames: Vec<SimFrame> = Vec::new();
    let mut reports = Vec::new();
    for (index, op) in script.iter().enumerate() {
        let offset = frames.last().map(|f| f.time).unwrap_or(0.0);
        match morphpivot(&current, op, config) {
            Ok(outcome) if outcome.report.pass => {
                let mut fs = outcome.frames;
                if !frames.is_empty() {
                    fs.remove(0);
                }
                shift(&mut fs, offset);
                frames.extend(fs);
                reports.push(outcome.report);
                current = outcome.tree;
            }
            Ok(outcome) => {
                reports.push(outcome.report);
                return ScriptOutcome {
                    tree: current,
                    frames,
                    reports,
                    failure: Some((index, EngineError::DockingFailed(outcome.report))),
                };
            }
            Err(e) => {
                return ScriptOutcome {
                    tree: current,
                    frames,
                    reports,
                    failure: Some((index, e)),
                };
            }
        }
    }
    if frames.is_empty() {
        frames.push(SimFrame::capture(&current, 0.0, FrameEvent::Morph));
    }
    ScriptOutcome {
        tree: current,
        frames,
        reports,
        failure: None,
    }
}
