//! Trajectories as JSON lines, one frame per line.

use std::io::{BufRead, Write};

use rhombot_core::{
    Connection, ConnectionKind, EdgeIndex, FrameEvent, ModuleFrame, ModuleId, ModuleParams,
    ModuleState, Pose2, SimFrame,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleRecord {
    pub id: u32,
    /// World pose of the module frame, rad and m.
    pub yaw: f64,
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
    /// Physical index of the edge currently labeled E0.
    pub e0: u8,
    /// Current folding angle, rad.
    pub theta: f64,
    pub a: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindRecord {
    Tree,
    Loop,
}

/// Connection in current edge labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionRecord {
    pub a: u32,
    pub edge_a: u8,
    pub b: u32,
    pub edge_b: u8,
    pub kind: KindRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub time: f64,
    pub event: String,
    pub modules: Vec<ModuleRecord>,
    pub connections: Vec<ConnectionRecord>,
}

fn event_from_str(s: &str) -> Option<FrameEvent> {
    [
        FrameEvent::Morph,
        FrameEvent::Connect,
        FrameEvent::Disconnect,
        FrameEvent::Reparent,
    ]
    .into_iter()
    .find(|e| e.as_str() == s)
}

impl FrameRecord {
    pub fn from_frame(f: &SimFrame) -> Self {
        Self {
            time: f.time,
            event: f.event.as_str().to_owned(),
            modules: f
                .modules
                .iter()
                .map(|m| ModuleRecord {
                    id: m.state.id.0,
                    yaw: m.pose.yaw,
                    x: m.pose.x,
                    y: m.pose.y,
                    sigma: m.state.sigma,
                    e0: m.state.e0.value(),
                    theta: m.state.theta(),
                    a: m.state.params.a,
                    theta_min: m.state.params.theta_min,
                    theta_max: m.state.params.theta_max,
                })
                .collect(),
            connections: f
                .connections
                .iter()
                .map(|c| ConnectionRecord {
                    a: c.module_a.0,
                    edge_a: c.edge_a.value(),
                    b: c.module_b.0,
                    edge_b: c.edge_b.value(),
                    kind: match c.kind {
                        ConnectionKind::Tree => KindRecord::Tree,
                        ConnectionKind::Loop => KindRecord::Loop,
                    },
                })
                .collect(),
        }
    }

    pub fn to_frame(&self) -> Result<SimFrame> {
        let edge = |field: &str, k: u8| {
            EdgeIndex::new(k).map_err(|e| Error::semantic(field, e.to_string()))
        };
        let event = event_from_str(&self.event)
            .ok_or_else(|| Error::semantic("event", format!("unknown event {:?}", self.event)))?;
        let modules = self
            .modules
            .iter()
            .map(|m| {
                let params = ModuleParams {
                    a: m.a,
                    theta_min: m.theta_min,
                    theta_max: m.theta_max,
                };
                Ok(ModuleFrame {
                    state: ModuleState {
                        id: ModuleId(m.id),
                        sigma: m.sigma,
                        e0: edge("modules.e0", m.e0)?,
                        params,
                    },
                    pose: Pose2::new(m.yaw, m.x, m.y),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let connections = self
            .connections
            .iter()
            .map(|c| {
                Ok(Connection {
                    module_a: ModuleId(c.a),
                    edge_a: edge("connections.edge_a", c.edge_a)?,
                    module_b: ModuleId(c.b),
                    edge_b: edge("connections.edge_b", c.edge_b)?,
                    kind: match c.kind {
                        KindRecord::Tree => ConnectionKind::Tree,
                        KindRecord::Loop => ConnectionKind::Loop,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SimFrame {
            time: self.time,
            modules,
            connections,
            event,
        })
    }
}

pub fn write_frames<W: Write>(mut out: W, frames: &[SimFrame]) -> std::io::Result<()> {
    for f in frames {
        serde_json::to_writer(&mut out, &FrameRecord::from_frame(f))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_frames<R: BufRead>(input: R) -> Result<Vec<SimFrame>> {
    let mut frames = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<trajectory>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FrameRecord = serde_json::from_str(&line).map_err(|e| Error::Syntax {
            line: i + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        frames.push(rec.to_frame()?);
    }
    Ok(frames)
}

/// Frame equality with a tolerance on every float.
pub fn frames_close(a: &SimFrame, b: &SimFrame, tol: f64) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= tol;
    a.event == b.event
        && close(a.time, b.time)
        && a.connections == b.connections
        && a.modules.len() == b.modules.len()
        && a.modules.iter().zip(&b.modules).all(|(p, q)| {
            p.state.id == q.state.id
                && p.state.e0 == q.state.e0
                && close(p.state.sigma, q.state.sigma)
                && p.state.params == q.state.params
                && close(p.pose.yaw, q.pose.yaw)
                && close(p.pose.x, q.pose.x)
                && close(p.pose.y, q.pose.y)
        })
}
