//! Morphpivot scripts: an ordered list of `[[op]]` tables.
//!
//! ```toml
//! version = 1
//!
//! [[op]]
//! connect = { a = 3, edge_a = 3, b = 2, edge_b = 0 }
//! disconnect = [1, 3]
//! align = [1, 2, 3]
//! post_morph = [
//!     { module = 1, theta_deg = 90.0 },
//!     { module = 2, theta_deg = 90.0 },
//!     { module = 3, theta_deg = 90.0 },
//! ]
//! ```
//!
//! `pre_morph` lists explicit targets; `align` instead names the modules
//! whose angles are solved so the new connection's edges meet. Targets
//! ramp in list order unless `order` is given. Edges are physical labels.

use rhombot_core::geometry::deg;
use rhombot_core::{
    Coupling, EdgeIndex, EdgeRef, ModuleId, MorphPivotOp, MorphPlan, MorphTarget,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{ConnectionDoc, FORMAT_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptDoc {
    pub version: u32,
    #[serde(rename = "op", default)]
    pub ops: Vec<OpDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingDoc {
    #[default]
    Independent,
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDoc {
    pub module: u32,
    pub theta_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpDoc {
    pub connect: ConnectionDoc,
    pub disconnect: [u32; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pre_morph: Vec<TargetDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub align: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub post_morph: Vec<TargetDoc>,
    /// rad/s; the engine default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morph_rate: Option<f64>,
}

pub fn parse_script(text: &str) -> Result<ScriptDoc> {
    let doc: ScriptDoc = toml::from_str(text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start);
        Error::syntax_at(text, offset, e.message().trim_end())
    })?;
    if doc.version != FORMAT_VERSION {
        return Err(Error::semantic(
            "version",
            format!("unsupported format version {} (expected {FORMAT_VERSION})", doc.version),
        ));
    }
    Ok(doc)
}

pub fn serialize_script(doc: &ScriptDoc) -> String {
    toml::to_string(doc).expect("script documents always serialize")
}

fn targets(list: &[TargetDoc]) -> Vec<MorphTarget> {
    list.iter()
        .enumerate()
        .map(|(i, t)| MorphTarget {
            module: ModuleId(t.module),
            theta: deg(t.theta_deg),
            order: t.order.unwrap_or(i as u32),
        })
        .collect()
}

fn target_docs(list: &[MorphTarget]) -> Vec<TargetDoc> {
    list.iter()
        .enumerate()
        .map(|(i, t)| TargetDoc {
            module: t.module.0,
            theta_deg: t.theta.to_degrees(),
            order: (t.order != i as u32).then_some(t.order),
        })
        .collect()
}

impl OpDoc {
    /// `field` prefixes error paths, e.g. `op[2]`.
    pub fn to_op(&self, field: &str, default_rate: f64) -> Result<MorphPivotOp> {
        let edge = |name: &str, id: u32, k: u8| -> Result<EdgeRef> {
            EdgeIndex::new(k)
                .map(|e| EdgeRef::new(ModuleId(id), e))
                .map_err(|e| Error::semantic(format!("{field}.connect.{name}"), e.to_string()))
        };
        let c = &self.connect;
        let new_con = (edge("edge_a", c.a, c.edge_a)?, edge("edge_b", c.b, c.edge_b)?);
        let pre_morph = match (&self.align, self.pre_morph.is_empty()) {
            (Some(_), false) => {
                return Err(Error::semantic(
                    format!("{field}.align"),
                    "align and pre_morph are mutually exclusive",
                ))
            }
            (Some(mods), true) => MorphPlan::Align {
                modules: mods.iter().map(|m| ModuleId(*m)).collect(),
                coupling: match self.coupling.unwrap_or_default() {
                    CouplingDoc::Independent => Coupling::Independent,
                    CouplingDoc::Equal => Coupling::EqualTheta,
                },
            },
            (None, _) => {
                if self.coupling.is_some() {
                    return Err(Error::semantic(
                        format!("{field}.coupling"),
                        "coupling only applies together with align",
                    ));
                }
                MorphPlan::Targets(targets(&self.pre_morph))
            }
        };
        let morph_rate = self.morph_rate.unwrap_or(default_rate);
        if !(morph_rate > 0.0 && morph_rate.is_finite()) {
            return Err(Error::semantic(
                format!("{field}.morph_rate"),
                format!("must be positive, got {morph_rate}"),
            ));
        }
        Ok(MorphPivotOp {
            new_con,
            new_discon: (ModuleId(self.disconnect[0]), ModuleId(self.disconnect[1])),
            pre_morph,
            post_morph: targets(&self.post_morph),
            morph_rate,
        })
    }

    pub fn from_op(op: &MorphPivotOp) -> OpDoc {
        let (x, y) = op.new_con;
        let (pre_morph, align, coupling) = match &op.pre_morph {
            MorphPlan::Targets(t) => (target_docs(t), None, None),
            MorphPlan::Align { modules, coupling } => (
                Vec::new(),
                Some(modules.iter().map(|m| m.0).collect()),
                Some(match coupling {
                    Coupling::Independent => CouplingDoc::Independent,
                    Coupling::EqualTheta => CouplingDoc::Equal,
                }),
            ),
        };
        OpDoc {
            connect: ConnectionDoc {
                a: x.module.0,
                edge_a: x.edge.value(),
                b: y.module.0,
                edge_b: y.edge.value(),
            },
            disconnect: [op.new_discon.0 .0, op.new_discon.1 .0],
            pre_morph,
            align,
            coupling,
            post_morph: target_docs(&op.post_morph),
            morph_rate: Some(op.morph_rate),
        }
    }
}

impl ScriptDoc {
    pub fn to_ops(&self, default_rate: f64) -> Result<Vec<MorphPivotOp>> {
        self.ops
            .iter()
            .enumerate()
            .map(|(i, op)| op.to_op(&format!("op[{i}]"), default_rate))
            .collect()
    }
}
