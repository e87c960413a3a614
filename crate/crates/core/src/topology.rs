//! Kinematic tree over modules plus the surplus (loop) connections.
//!
//! Connections are stored against physical edge indices, so relabeling a
//! module never rewrites the connection list; current labels are derived
//! from each module's `e0`.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use thiserror::Error;

use crate::closure::{Closure, KinematicLoop};
use crate::geometry::{normalize_angle, ConvexPoly, Pose2};
use crate::kinematics::{
    footprint, outward_edge_frame, remap_sigma, EdgeIndex, KinematicsError,
    ModuleId, ModuleState,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("unknown module {0}")]
    UnknownModule(ModuleId),
    #[error("module {0} declared more than once")]
    DuplicateModule(ModuleId),
    #[error("module {0} cannot connect to itself")]
    SelfConnection(ModuleId),
    #[error("edge {edge} of {module} is already connected")]
    EdgeOccupied { module: ModuleId, edge: EdgeIndex },
    #[error("disconnected: modules {unreachable:?} are not reachable from the root")]
    Disconnected { unreachable: Vec<ModuleId> },
    #[error(
        "connection {a}-{b} is geometrically inconsistent \
         (offset {position_offset:.6} m, {angular_offset:.6} rad)"
    )]
    Inconsistent {
        a: ModuleId,
        b: ModuleId,
        position_offset: f64,
        angular_offset: f64,
    },
    #[error(
        "edges of {a} and {b} are misaligned \
         (offset {position_offset:.6} m, {angular_offset:.6} rad)"
    )]
    Misaligned {
        a: ModuleId,
        b: ModuleId,
        position_offset: f64,
        angular_offset: f64,
    },
    #[error("{0} and {1} are not connected")]
    NotConnected(ModuleId, ModuleId),
    #[error("removing {0}-{1} would split the system")]
    ConnectivityViolation(ModuleId, ModuleId),
    #[error("tree has an orphaned module {0} awaiting a new parent")]
    Pending(ModuleId),
    #[error("module {0} is not the pending orphan")]
    NotPending(ModuleId),
    #[error("orphan {0} has no neighbor connected to the root")]
    UnrecoverableSplit(ModuleId),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Docking tolerances between two edge frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Midpoint distance, meters.
    pub position: f64,
    /// Deviation of the relative yaw from pi, radians.
    pub angle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            position: 0.005,
            angle: 3f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConnectionKind {
    Tree,
    Loop,
}

/// One edge of one module. Whether `edge` is a current label or a physical
/// index is stated by each function taking it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeRef {
    pub module: ModuleId,
    pub edge: EdgeIndex,
}

impl EdgeRef {
    pub fn new(module: ModuleId, edge: EdgeIndex) -> Self {
        Self { module, edge }
    }
}

/// A connection in current labels. For tree edges `module_a` is the parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Connection {
    pub module_a: ModuleId,
    pub edge_a: EdgeIndex,
    pub module_b: ModuleId,
    pub edge_b: EdgeIndex,
    pub kind: ConnectionKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Link {
    a: EdgeRef,
    b: EdgeRef,
}

impl Link {
    fn new(x: EdgeRef, y: EdgeRef) -> Self {
        if x.module <= y.module {
            Link { a: x, b: y }
        } else {
            Link { a: y, b: x }
        }
    }

    fn joins(&self, m: ModuleId, n: ModuleId) -> bool {
        (self.a.module == m && self.b.module == n) || (self.a.module == n && self.b.module == m)
    }

    fn touches(&self, m: ModuleId) -> bool {
        self.a.module == m || self.b.module == m
    }

    /// `(own physical edge, neighbor)` from `m`'s side.
    fn side(&self, m: ModuleId) -> (EdgeRef, EdgeRef) {
        if self.a.module == m {
            (self.a, self.b)
        } else {
            (self.b, self.a)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KTree {
    modules: BTreeMap<ModuleId, ModuleState>,
    root: ModuleId,
    base: Pose2,
    links: BTreeSet<Link>,
    parent: BTreeMap<ModuleId, ModuleId>,
    /// Orphaned module and its world frame, between a tree-edge disconnect
    /// and the matching `assign_new_parent`.
    orphan: Option<(ModuleId, Pose2)>,
}

impl KTree {
    /// Builds the kinematic tree: breadth-first from `root` (neighbors in
    /// ascending id order), each child relabeled so its parent edge is E0,
    /// surplus connections kept as loop edges. Connection edges are current
    /// labels of the given states.
    pub fn initialize(
        modules: Vec<ModuleState>,
        connections: &[(EdgeRef, EdgeRef)],
        root: ModuleId,
        base: Pose2,
        tol: &Tolerances,
    ) -> Result<KTree, TopologyError> {
        let mut map = BTreeMap::new();
        for m in modules {
            m.params.validate()?;
            m.check_limits()?;
            if map.insert(m.id, m).is_some() {
                return Err(TopologyError::DuplicateModule(m.id));
            }
        }
        if !map.contains_key(&root) {
            return Err(TopologyError::UnknownModule(root));
        }

        let mut links = BTreeSet::new();
        let mut used = BTreeSet::new();
        for (x, y) in connections {
            let sx = map.get(&x.module).ok_or(TopologyError::UnknownModule(x.module))?;
            let sy = map.get(&y.module).ok_or(TopologyError::UnknownModule(y.module))?;
            if x.module == y.module {
                return Err(TopologyError::SelfConnection(x.module));
            }
            let px = EdgeRef::new(x.module, sx.physical_of(x.edge));
            let py = EdgeRef::new(y.module, sy.physical_of(y.edge));
            for (p, label) in [(px, x), (py, y)] {
                if !used.insert(p) {
                    return Err(TopologyError::EdgeOccupied {
                        module: p.module,
                        edge: label.edge,
                    });
                }
            }
            links.insert(Link::new(px, py));
        }

        let mut tree = KTree {
            modules: map,
            root,
            base,
            links,
            parent: BTreeMap::new(),
            orphan: None,
        };

        let mut seen = BTreeSet::from([root]);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let mut next: Vec<(ModuleId, EdgeIndex)> = tree
                .links
                .iter()
                .filter(|l| l.touches(u))
                .map(|l| {
                    let (_, other) = l.side(u);
                    (other.module, other.edge)
                })
                .collect();
            next.sort();
            for (v, v_edge) in next {
                if seen.insert(v) {
                    tree.parent.insert(v, u);
                    tree.make_e0(v, v_edge);
                    queue.push_back(v);
                }
            }
        }
        if seen.len() != tree.modules.len() {
            let unreachable = tree
                .modules
                .keys()
                .filter(|id| !seen.contains(id))
                .copied()
                .collect();
            return Err(TopologyError::Disconnected { unreachable });
        }
        tree.check_loops(tol)?;
        Ok(tree)
    }

    pub fn root(&self) -> ModuleId {
        self.root
    }

    /// World pose of the root E0 frame.
    pub fn base(&self) -> Pose2 {
        self.base
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    pub fn module(&self, id: ModuleId) -> Result<&ModuleState, TopologyError> {
        self.modules.get(&id).ok_or(TopologyError::UnknownModule(id))
    }

    pub fn modules(&self) -> impl Iterator<Item = &ModuleState> {
        self.modules.values()
    }

    pub fn module_ids(&self) -> Vec<ModuleId> {
        self.modules.keys().copied().collect()
    }

    pub fn pending(&self) -> Option<ModuleId> {
        self.orphan.map(|(m, _)| m)
    }

    pub fn is_pending(&self) -> bool {
        self.orphan.is_some()
    }

    fn ensure_settled(&self) -> Result<(), TopologyError> {
        match self.orphan {
            Some((m, _)) => Err(TopologyError::Pending(m)),
            None => Ok(()),
        }
    }

    /// Parent of `id` and the parent's current edge label it hangs from.
    pub fn parent_of(&self, id: ModuleId) -> Option<(ModuleId, EdgeIndex)> {
        let p = *self.parent.get(&id)?;
        let link = self.links.iter().find(|l| l.joins(id, p))?;
        let (own, _) = link.side(p);
        Some((p, self.modules[&p].label_of(own.edge)))
    }

    pub fn children(&self, id: ModuleId) -> Vec<ModuleId> {
        self.parent
            .iter()
            .filter(|(_, p)| **p == id)
            .map(|(c, _)| *c)
            .collect()
    }

    fn is_tree_link(&self, l: &Link) -> bool {
        self.parent.get(&l.a.module) == Some(&l.b.module)
            || self.parent.get(&l.b.module) == Some(&l.a.module)
    }

    /// All connections in current labels, tree edges oriented parent first.
    pub fn connections(&self) -> Vec<Connection> {
        self.links
            .iter()
            .map(|l| {
                let tree = self.is_tree_link(l);
                let (x, y) = if tree && self.parent.get(&l.a.module) == Some(&l.b.module) {
                    (l.b, l.a)
                } else {
                    (l.a, l.b)
                };
                Connection {
                    module_a: x.module,
                    edge_a: self.modules[&x.module].label_of(x.edge),
                    module_b: y.module,
                    edge_b: self.modules[&y.module].label_of(y.edge),
                    kind: if tree {
                        ConnectionKind::Tree
                    } else {
                        ConnectionKind::Loop
                    },
                }
            })
            .collect()
    }

    /// Connections in the physical labeling of each module, `(a, b)` with
    /// `a.module < b.module`.
    pub fn physical_connections(&self) -> Vec<(EdgeRef, EdgeRef)> {
        self.links.iter().map(|l| (l.a, l.b)).collect()
    }

    /// Neighbor graph as sorted id pairs.
    pub fn adjacency(&self) -> BTreeSet<(ModuleId, ModuleId)> {
        self.links.iter().map(|l| (l.a.module, l.b.module)).collect()
    }

    pub fn connected(&self, a: ModuleId, b: ModuleId) -> bool {
        self.links.iter().any(|l| l.joins(a, b))
    }

    /// The neighbor on a module's edge (current label), if any.
    pub fn occupant(&self, at: EdgeRef) -> Result<Option<EdgeRef>, TopologyError> {
        let phys = EdgeRef::new(at.module, self.module(at.module)?.physical_of(at.edge));
        Ok(self.links.iter().find_map(|l| {
            let (own, other) = l.side(at.module);
            (l.touches(at.module) && own == phys).then(|| {
                EdgeRef::new(other.module, self.modules[&other.module].label_of(other.edge))
            })
        }))
    }

    /// Converts a physical edge reference to the current label.
    pub fn label_of(&self, physical: EdgeRef) -> Result<EdgeRef, TopologyError> {
        Ok(EdgeRef::new(
            physical.module,
            self.module(physical.module)?.label_of(physical.edge),
        ))
    }

    /// Updates a module's folding angle without any feasibility checks
    /// beyond theta limits.
    pub fn set_theta(&mut self, id: ModuleId, theta: f64) -> Result<(), TopologyError> {
        let m = self
            .modules
            .get_mut(&id)
            .ok_or(TopologyError::UnknownModule(id))?;
        let mut next = *m;
        next.set_theta(theta);
        next.check_limits()?;
        *m = next;
        Ok(())
    }

    /// Relabels `id` so that physical edge `phys` becomes E0.
    fn make_e0(&mut self, id: ModuleId, phys: EdgeIndex) {
        let m = self.modules.get_mut(&id).expect("known module");
        let label = m.label_of(phys);
        *m = remap_sigma(m, label);
    }

    /// World pose of every module's current E0 frame.
    pub fn world_poses(&self) -> BTreeMap<ModuleId, Pose2> {
        let mut poses = BTreeMap::new();
        poses.insert(self.root, self.base);
        if let Some((o, p)) = self.orphan {
            poses.insert(o, p);
        }
        let mut children: BTreeMap<ModuleId, Vec<ModuleId>> = BTreeMap::new();
        for (c, p) in &self.parent {
            children.entry(*p).or_default().push(*c);
        }
        let mut stack: Vec<ModuleId> = poses.keys().copied().collect();
        while let Some(u) = stack.pop() {
            let Some(kids) = children.get(&u) else { continue };
            let pu = poses[&u];
            for &c in kids {
                let (_, edge) = self.parent_of(c).expect("parent link present");
                let pose = pu.compose(&outward_edge_frame(&self.modules[&u], edge));
                poses.insert(c, pose);
                stack.push(c);
            }
        }
        poses
    }

    pub fn footprints(&self) -> BTreeMap<ModuleId, ConvexPoly> {
        self.world_poses()
            .into_iter()
            .map(|(id, pose)| (id, footprint(&self.modules[&id], &pose)))
            .collect()
    }

    /// Position and angular offset between two edges (current labels).
    pub fn edge_alignment(&self, x: EdgeRef, y: EdgeRef) -> Result<(f64, f64), TopologyError> {
        let poses = self.world_poses();
        self.alignment_with(&poses, x, y)
    }

    fn alignment_with(
        &self,
        poses: &BTreeMap<ModuleId, Pose2>,
        x: EdgeRef,
        y: EdgeRef,
    ) -> Result<(f64, f64), TopologyError> {
        let frame = |r: EdgeRef| -> Result<Pose2, TopologyError> {
            let s = self.module(r.module)?;
            let p = poses.get(&r.module).ok_or(TopologyError::UnknownModule(r.module))?;
            Ok(p.compose(&outward_edge_frame(s, r.edge)))
        };
        let fx = frame(x)?;
        let fy = frame(y)?;
        Ok((
            fx.position().distance(fy.position()),
            normalize_angle(fx.yaw - fy.yaw - PI).abs(),
        ))
    }

    /// Checks every loop connection against the tolerances.
    pub fn check_loops(&self, tol: &Tolerances) -> Result<(), TopologyError> {
        let poses = self.world_poses();
        for l in &self.links {
            if self.is_tree_link(l) {
                continue;
            }
            let x = self.label_of(l.a)?;
            let y = self.label_of(l.b)?;
            let (dp, da) = self.alignment_with(&poses, x, y)?;
            if dp > tol.position || da > tol.angle {
                return Err(TopologyError::Inconsistent {
                    a: l.a.module,
                    b: l.b.module,
                    position_offset: dp,
                    angular_offset: da,
                });
            }
        }
        Ok(())
    }

    fn neighbors(&self, u: ModuleId) -> Vec<ModuleId> {
        let mut v: Vec<ModuleId> = self
            .links
            .iter()
            .filter(|l| l.touches(u))
            .map(|l| l.side(u).1.module)
            .collect();
        v.sort();
        v
    }

    /// Breadth-first reachability over tree and loop connections, skipping
    /// `excluding`. Returns a shortest path (ties by ascending id).
    pub fn is_conn(
        &self,
        from: ModuleId,
        to: ModuleId,
        excluding: Option<ModuleId>,
    ) -> Result<(bool, Vec<ModuleId>), TopologyError> {
        self.module(from)?;
        self.module(to)?;
        if excluding == Some(from) || excluding == Some(to) {
            return Ok((false, Vec::new()));
        }
        let mut prev: BTreeMap<ModuleId, ModuleId> = BTreeMap::new();
        let mut seen = BTreeSet::from([from]);
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            if u == to {
                let mut path = vec![to];
                let mut cur = to;
                while let Some(&p) = prev.get(&cur) {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                return Ok((true, path));
            }
            for v in self.neighbors(u) {
                if Some(v) != excluding && seen.insert(v) {
                    prev.insert(v, u);
                    queue.push_back(v);
                }
            }
        }
        Ok((false, Vec::new()))
    }

    fn spans_without(&self, skip: &Link) -> bool {
        let mut seen = BTreeSet::from([self.root]);
        let mut queue = VecDeque::from([self.root]);
        while let Some(u) = queue.pop_front() {
            for l in self.links.iter().filter(|l| *l != skip && l.touches(u)) {
                let v = l.side(u).1.module;
                if seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        seen.len() == self.modules.len()
    }

    /// Adds a loop connection between two free edges (current labels) whose
    /// frames coincide within `tol`.
    pub fn connect(&self, x: EdgeRef, y: EdgeRef, tol: &Tolerances) -> Result<KTree, TopologyError> {
        self.ensure_settled()?;
        if x.module == y.module {
            return Err(TopologyError::SelfConnection(x.module));
        }
        for r in [x, y] {
            if self.occupant(r)?.is_some() {
                return Err(TopologyError::EdgeOccupied {
                    module: r.module,
                    edge: r.edge,
                });
            }
        }
        let (dp, da) = self.edge_alignment(x, y)?;
        if dp > tol.position || da > tol.angle {
            return Err(TopologyError::Misaligned {
                a: x.module,
                b: y.module,
                position_offset: dp,
                angular_offset: da,
            });
        }
        let mut next = self.clone();
        let px = EdgeRef::new(x.module, self.modules[&x.module].physical_of(x.edge));
        let py = EdgeRef::new(y.module, self.modules[&y.module].physical_of(y.edge));
        next.links.insert(Link::new(px, py));
        Ok(next)
    }

    /// Removes the connection between `a` and `b`. Breaking a tree edge
    /// leaves the child side orphaned until [`assign_new_parent`] runs.
    ///
    /// [`assign_new_parent`]: KTree::assign_new_parent
    pub fn disconnect(&self, a: ModuleId, b: ModuleId) -> Result<KTree, TopologyError> {
        self.ensure_settled()?;
        self.module(a)?;
        self.module(b)?;
        let link = *self
            .links
            .iter()
            .find(|l| l.joins(a, b))
            .ok_or(TopologyError::NotConnected(a, b))?;
        if !self.spans_without(&link) {
            return Err(TopologyError::ConnectivityViolation(a, b));
        }
        let mut next = self.clone();
        if self.is_tree_link(&link) {
            let child = if self.parent.get(&a) == Some(&b) { a } else { b };
            let pose = self.world_poses()[&child];
            next.parent.remove(&child);
            next.orphan = Some((child, pose));
        }
        next.links.remove(&link);
        Ok(next)
    }

    /// Modules in the subtree under `m`, `m` included.
    fn subtree(&self, m: ModuleId) -> BTreeSet<ModuleId> {
        let mut out = BTreeSet::from([m]);
        let mut stack = vec![m];
        while let Some(u) = stack.pop() {
            for (c, p) in &self.parent {
                if *p == u && out.insert(*c) {
                    stack.push(*c);
                }
            }
        }
        out
    }

    /// Re-anchors the pending orphan `m` on the first neighbor (ascending
    /// edge label of `m`) that reaches the root without passing through
    /// `m`. Modules of the orphaned subtree lying on that root path are
    /// re-parented along it, each relabeled so its new parent edge is E0.
    pub fn assign_new_parent(&self, m: ModuleId) -> Result<KTree, TopologyError> {
        match self.orphan {
            Some((o, _)) if o == m => {}
            _ => return Err(TopologyError::NotPending(m)),
        }
        let state = self.module(m)?;
        let mut candidates: Vec<(EdgeIndex, ModuleId)> = self
            .links
            .iter()
            .filter(|l| l.touches(m))
            .map(|l| {
                let (own, other) = l.side(m);
                (state.label_of(own.edge), other.module)
            })
            .collect();
        candidates.sort();

        let orphaned = self.subtree(m);
        for (_, near) in candidates {
            let (ok, path) = self.is_conn(self.root, near, Some(m))?;
            if !ok || path.contains(&m) {
                continue;
            }
            let mut next = self.clone();
            next.orphan = None;
            let mut chain = path;
            chain.push(m);
            for pair in chain.windows(2) {
                let (p, u) = (pair[0], pair[1]);
                if !orphaned.contains(&u) {
                    continue;
                }
                let link = *next
                    .links
                    .iter()
                    .find(|l| l.joins(p, u))
                    .expect("path follows existing links");
                next.parent.insert(u, p);
                next.make_e0(u, link.side(u).0.edge);
            }
            return Ok(next);
        }
        Err(TopologyError::UnrecoverableSplit(m))
    }

    /// Full structural check: a single root, an acyclic spanning parent map
    /// over existing links, E0 on every parent edge, no edge used twice.
    pub fn check_invariants(&self) -> Result<(), TopologyError> {
        let fail = |msg: String| Err(TopologyError::Invariant(msg));
        if !self.modules.contains_key(&self.root) {
            return fail(format!("root {} missing", self.root));
        }
        if self.parent.contains_key(&self.root) {
            return fail(format!("root {} has a parent", self.root));
        }
        let mut used = BTreeSet::new();
        for l in &self.links {
            for r in [l.a, l.b] {
                if !self.modules.contains_key(&r.module) {
                    return fail(format!("link references unknown {}", r.module));
                }
                if !used.insert(r) {
                    return fail(format!("edge {} of {} used twice", r.edge, r.module));
                }
            }
            if l.a.module == l.b.module {
                return fail(format!("self link on {}", l.a.module));
            }
        }
        let orphan = self.pending();
        for (id, state) in &self.modules {
            state.check_limits()?;
            if *id == self.root || Some(*id) == orphan {
                continue;
            }
            let Some(&p) = self.parent.get(id) else {
                return fail(format!("{id} has no parent"));
            };
            let Some(link) = self.links.iter().find(|l| l.joins(*id, p)) else {
                return fail(format!("{id} parent {p} without a connection"));
            };
            if link.side(*id).0.edge != state.e0 {
                return fail(format!("{id}: E0 is not the edge to its parent {p}"));
            }
            // walk up to the root (or the orphan) without revisiting
            let mut cur = *id;
            let mut steps = 0;
            while let Some(&up) = self.parent.get(&cur) {
                cur = up;
                steps += 1;
                if steps > self.modules.len() {
                    return fail(format!("cycle through {id}"));
                }
            }
            if cur != self.root && Some(cur) != orphan {
                return fail(format!("{id} does not reach the root"));
            }
        }
        Ok(())
    }

    /// Two-branch loop that closes when edges `x` and `y` (current labels)
    /// coincide. Both branches run down the tree from the root.
    pub fn docking_loop(&self, x: EdgeRef, y: EdgeRef) -> Result<KinematicLoop, TopologyError> {
        self.ensure_settled()?;
        let px = self.path_from_root(x.module)?;
        let py = self.path_from_root(y.module)?;
        let mut ids: Vec<ModuleId> = px.iter().chain(&py).copied().collect();
        ids.sort();
        ids.dedup();
        let index = |id: ModuleId| ids.iter().position(|i| *i == id).unwrap();
        let branch = |path: &[ModuleId]| -> Vec<(usize, EdgeIndex)> {
            path.windows(2)
                .map(|w| {
                    let (_, edge) = self.parent_of(w[1]).expect("tree path");
                    (index(w[0]), edge)
                })
                .collect()
        };
        Ok(KinematicLoop {
            states: ids.iter().map(|id| self.modules[id]).collect(),
            branch1: branch(&px),
            branch2: branch(&py),
            closure: Closure::Dock {
                edge1: (index(x.module), x.edge),
                edge2: (index(y.module), y.edge),
            },
        })
    }

    /// `[root, ..., id]` along parent links.
    pub fn path_from_root(&self, id: ModuleId) -> Result<Vec<ModuleId>, TopologyError> {
        self.module(id)?;
        let mut path = vec![id];
        let mut cur = id;
        while let Some(&p) = self.parent.get(&cur) {
            path.push(p);
            cur = p;
            if path.len() > self.modules.len() {
                return Err(TopologyError::Invariant(format!("cycle through {id}")));
            }
        }
        if cur != self.root {
            return Err(TopologyError::Pending(cur));
        }
        path.reverse();
        Ok(path)
    }

    /// Replaces module states (same ids); used by the engine and solver.
    pub fn with_states(&self, states: &[ModuleState]) -> Result<KTree, TopologyError> {
        let mut next = self.clone();
        for s in states {
            let slot = next
                .modules
                .get_mut(&s.id)
                .ok_or(TopologyError::UnknownModule(s.id))?;
            *slot = *s;
        }
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::deg;
    use crate::kinematics::ModuleParams;

    fn m(id: u32) -> ModuleState {
        ModuleState::new(ModuleId(id), deg(90.0), ModuleParams::default()).unwrap()
    }

    fn e(id: u32, k: u8) -> EdgeRef {
        EdgeRef::new(ModuleId(id), EdgeIndex::new(k).unwrap())
    }

    #[test]
    fn pending_orphan_without_links_cannot_recover() {
        // only reachable by poking internals: disconnect refuses splits
        let tree = KTree::initialize(
            vec![m(0), m(1)],
            &[(e(0, 2), e(1, 0))],
            ModuleId(0),
            Pose2::IDENTITY,
            &Tolerances::default(),
        )
        .unwrap();
        assert_eq!(
            tree.disconnect(ModuleId(0), ModuleId(1)),
            Err(TopologyError::ConnectivityViolation(ModuleId(0), ModuleId(1)))
        );
        let mut broken = tree.clone();
        broken.links.clear();
        broken.parent.clear();
        broken.orphan = Some((ModuleId(1), Pose2::IDENTITY));
        assert_eq!(
            broken.assign_new_parent(ModuleId(1)),
            Err(TopologyError::UnrecoverableSplit(ModuleId(1)))
        );
    }

    #[test]
    fn pending_tree_rejects_other_operations() {
        let tree = KTree::initialize(
            vec![m(0), m(1), m(2), m(3)],
            &[
                (e(0, 2), e(1, 0)),
                (e(0, 1), e(3, 0)),
                (e(1, 1), e(2, 0)),
                (e(2, 1), e(3, 3)),
            ],
            ModuleId(0),
            Pose2::IDENTITY,
            &Tolerances::default(),
        )
        .unwrap();
        let pending = tree.disconnect(ModuleId(0), ModuleId(1)).unwrap();
        assert_eq!(pending.pending(), Some(ModuleId(1)));
        assert!(matches!(
            pending.disconnect(ModuleId(1), ModuleId(2)),
            Err(TopologyError::Pending(_))
        ));
        assert!(matches!(
            pending.assign_new_parent(ModuleId(2)),
            Err(TopologyError::NotPending(_))
        ));
        pending.check_invariants().unwrap();
    }
}
