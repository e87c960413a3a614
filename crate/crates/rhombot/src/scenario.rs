//! Scenario files: modules, their connections and the root, in TOML.
//!
//! ```toml
//! version = 1
//! root = 0
//!
//! [[module]]
//! id = 0
//! theta_deg = 90.0
//!
//! [[module]]
//! id = 1
//! theta_deg = 90.0
//!
//! [[connection]]
//! a = 0
//! edge_a = 2
//! b = 1
//! edge_b = 0
//! ```
//!
//! Angles are degrees and lengths meters (tolerances in millimeters) in the
//! file; everything is converted to SI radians on load. Edge indices are the
//! module's physical labels, i.e. its labeling when first declared.

use std::collections::BTreeSet;

use rhombot_core::geometry::deg;
use rhombot_core::{
    EdgeIndex, EdgeRef, EngineConfig, KTree, ModuleId, ModuleParams, ModuleState, MorphMode,
    Pose2, Tolerances,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub version: u32,
    pub root: u32,
    #[serde(default, skip_serializing_if = "PoseDoc::is_identity")]
    pub root_pose: PoseDoc,
    #[serde(default, skip_serializing_if = "EngineDefaults::is_default")]
    pub defaults: EngineDefaults,
    #[serde(rename = "module", default)]
    pub modules: Vec<ModuleDoc>,
    #[serde(rename = "connection", default, skip_serializing_if = "Vec::is_empty")]
    pub connections: Vec<ConnectionDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoseDoc {
    pub yaw_deg: f64,
    pub x: f64,
    pub y: f64,
}

impl PoseDoc {
    fn is_identity(&self) -> bool {
        *self == PoseDoc::default()
    }

    pub fn to_pose(self) -> Pose2 {
        Pose2::new(deg(self.yaw_deg), self.x, self.y)
    }

    pub fn from_pose(p: &Pose2) -> Self {
        Self {
            yaw_deg: p.yaw.to_degrees(),
            x: p.x,
            y: p.y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeDoc {
    #[default]
    Sequential,
    Simultaneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineDefaults {
    pub position_tolerance_mm: f64,
    pub angle_tolerance_deg: f64,
    /// rad/s
    pub morph_rate: f64,
    /// s
    pub dt: f64,
    pub clearance_mm: f64,
    pub mode: ModeDoc,
}

impl Default for EngineDefaults {
    fn default() -> Self {
        Self {
            position_tolerance_mm: 5.0,
            angle_tolerance_deg: 3.0,
            morph_rate: 0.2,
            dt: 0.05,
            clearance_mm: 0.0,
            mode: ModeDoc::Sequential,
        }
    }
}

impl EngineDefaults {
    fn is_default(&self) -> bool {
        *self == EngineDefaults::default()
    }

    pub fn to_config(&self) -> EngineConfig {
        EngineConfig {
            tolerances: Tolerances {
                position: self.position_tolerance_mm / 1000.0,
                angle: deg(self.angle_tolerance_deg),
            },
            morph_rate: self.morph_rate,
            dt: self.dt,
            clearance: self.clearance_mm / 1000.0,
            mode: match self.mode {
                ModeDoc::Sequential => MorphMode::Sequential,
                ModeDoc::Simultaneous => MorphMode::Simultaneous,
            },
        }
    }

    fn check(&self, out: &mut Vec<Error>) {
        let positive = [
            ("defaults.position_tolerance_mm", self.position_tolerance_mm),
            ("defaults.angle_tolerance_deg", self.angle_tolerance_deg),
            ("defaults.morph_rate", self.morph_rate),
            ("defaults.dt", self.dt),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                out.push(Error::semantic(field, format!("must be positive, got {v}")));
            }
        }
        if !(self.clearance_mm >= 0.0 && self.clearance_mm.is_finite()) {
            out.push(Error::semantic(
                "defaults.clearance_mm",
                format!("must be non-negative, got {}", self.clearance_mm),
            ));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleDoc {
    pub id: u32,
    pub theta_deg: f64,
    /// Half side length, m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_min_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_max_deg: Option<f64>,
}

impl ModuleDoc {
    pub fn params(&self) -> ModuleParams {
        let d = ModuleParams::default();
        ModuleParams {
            a: self.a.unwrap_or(d.a),
            theta_min: self.theta_min_deg.map_or(d.theta_min, deg),
            theta_max: self.theta_max_deg.map_or(d.theta_max, deg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionDoc {
    pub a: u32,
    pub edge_a: u8,
    pub b: u32,
    pub edge_b: u8,
}

/// Parses and validates a scenario, failing on the first problem.
pub fn parse_scenario(text: &str) -> Result<ScenarioDoc> {
    let doc = parse_syntax(text)?;
    match diagnose(&doc).into_iter().next() {
        Some(e) => Err(e),
        None => Ok(doc),
    }
}

/// Parses without semantic checks.
pub fn parse_syntax(text: &str) -> Result<ScenarioDoc> {
    toml::from_str(text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start);
        Error::syntax_at(text, offset, e.message().trim_end())
    })
}

pub fn serialize_scenario(doc: &ScenarioDoc) -> String {
    toml::to_string(doc).expect("scenario documents always serialize")
}

/// Every semantic problem of the document, each with its field path. The
/// tree itself is only built when this is empty.
pub fn diagnose(doc: &ScenarioDoc) -> Vec<Error> {
    let mut out = Vec::new();
    if doc.version != FORMAT_VERSION {
        out.push(Error::semantic(
            "version",
            format!("unsupported format version {} (expected {FORMAT_VERSION})", doc.version),
        ));
    }
    doc.defaults.check(&mut out);
    if doc.modules.is_empty() {
        out.push(Error::semantic("module", "at least one module is required"));
    }
    let mut ids = BTreeSet::new();
    for (i, m) in doc.modules.iter().enumerate() {
        if !ids.insert(m.id) {
            out.push(Error::semantic(
                format!("module[{i}].id"),
                format!("duplicate module id {}", m.id),
            ));
        }
        let params = m.params();
        if let Err(e) = params.validate() {
            out.push(Error::semantic(format!("module[{i}]"), e.to_string()));
            continue;
        }
        if !params.theta_in_range(deg(m.theta_deg)) {
            out.push(Error::semantic(
                format!("module[{i}].theta_deg"),
                format!(
                    "M{}: theta {} deg outside [{}, {}]",
                    m.id,
                    m.theta_deg,
                    params.theta_min.to_degrees(),
                    params.theta_max.to_degrees()
                ),
            ));
        }
    }
    if !ids.contains(&doc.root) {
        out.push(Error::semantic("root", format!("root M{} is not a declared module", doc.root)));
    }
    for (i, c) in doc.connections.iter().enumerate() {
        for (field, id) in [("a", c.a), ("b", c.b)] {
            if !ids.contains(&id) {
                out.push(Error::semantic(
                    format!("connection[{i}].{field}"),
                    format!("unknown module M{id}"),
                ));
            }
        }
        for (field, e) in [("edge_a", c.edge_a), ("edge_b", c.edge_b)] {
            if e > 3 {
                out.push(Error::semantic(
                    format!("connection[{i}].{field}"),
                    format!("edge index {e} out of range 0..=3"),
                ));
            }
        }
    }
    out
}

/// Builds the kinematic tree described by a validated document.
pub fn to_tree(doc: &ScenarioDoc) -> Result<KTree> {
    if let Some(e) = diagnose(doc).into_iter().next() {
        return Err(e);
    }
    let states = doc
        .modules
        .iter()
        .map(|m| ModuleState::new(ModuleId(m.id), deg(m.theta_deg), m.params()))
        .collect::<Result<Vec<_>, _>>()?;
    let edge = |id: u32, k: u8| -> Result<EdgeRef> {
        Ok(EdgeRef::new(ModuleId(id), EdgeIndex::new(k)?))
    };
    let cons = doc
        .connections
        .iter()
        .map(|c| Ok((edge(c.a, c.edge_a)?, edge(c.b, c.edge_b)?)))
        .collect::<Result<Vec<_>>>()?;
    let config = doc.defaults.to_config();
    Ok(KTree::initialize(
        states,
        &cons,
        ModuleId(doc.root),
        doc.root_pose.to_pose(),
        &config.tolerances,
    )?)
}

pub fn load_scenario(text: &str) -> Result<(KTree, EngineConfig)> {
    let doc = parse_scenario(text)?;
    let tree = to_tree(&doc)?;
    Ok((tree, doc.defaults.to_config()))
}

/// Scenario describing `tree` as it stands. Module parameters equal to the
/// defaults are left out.
pub fn from_tree(tree: &KTree, defaults: EngineDefaults) -> ScenarioDoc {
    let d = ModuleParams::default();
    let modules = tree
        .modules()
        .map(|s| ModuleDoc {
            id: s.id.0,
            theta_deg: s.theta().to_degrees(),
            a: (s.params.a != d.a).then_some(s.params.a),
            theta_min_deg: (s.params.theta_min != d.theta_min).then(|| s.params.theta_min.to_degrees()),
            theta_max_deg: (s.params.theta_max != d.theta_max).then(|| s.params.theta_max.to_degrees()),
        })
        .collect();
    let connections = tree
        .physical_connections()
        .into_iter()
        .map(|(x, y)| ConnectionDoc {
            a: x.module.0,
            edge_a: x.edge.value(),
            b: y.module.0,
            edge_b: y.edge.value(),
        })
        .collect();
    ScenarioDoc {
        version: FORMAT_VERSION,
        root: tree.root().0,
        root_pose: PoseDoc::from_pose(&tree.base()),
        defaults,
        modules,
        connections,
    }
}
