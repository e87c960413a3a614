//! Interactive planning session: one kinematic tree, a version counter for
//! optimistic concurrency, dry-run proposals and a bounded undo history.
//!
//! The session is a plain state machine; [`crate::server`] puts it behind a
//! socket. Every request is appended to an in-memory log, and replaying
//! that log into a fresh session reproduces the same state.

use std::collections::{BTreeMap, VecDeque};

use rhombot_core::geometry::deg;
use rhombot_core::kinematics::footprint;
use rhombot_core::{
    engine, EngineConfig, EngineError, KTree, ModuleId, MorphTarget, PivotOutcome, SimFrame,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::scenario::{self, EngineDefaults};
use crate::script::OpDoc;
use crate::trajectory::{ConnectionRecord, FrameRecord, ModuleRecord};

pub const PROTOCOL_VERSION: u32 = 1;
pub const HISTORY_LIMIT: usize = 64;

/// Request body, tagged by `kind` with its arguments under `payload`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Request {
    Load {
        scenario: String,
    },
    GetState,
    Propose {
        op: OpDoc,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        version: Option<u64>,
    },
    Commit {
        op_id: u64,
    },
    SetTheta {
        module: u32,
        theta_deg: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        version: Option<u64>,
    },
    Undo,
    SubscribeFrames {
        #[serde(default = "yes")]
        enabled: bool,
    },
}

fn yes() -> bool {
    true
}

/// A request as it travels on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub v: u32,
    pub id: u64,
    #[serde(flatten)]
    pub request: Request,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    UnsupportedVersion,
    NotLoaded,
    Invalid,
    Infeasible,
    Conflict,
    NothingToUndo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub v: u32,
    /// Echo of the request id; absent only when the request was unreadable.
    pub id: Option<u64>,
    pub kind: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub result: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl Response {
    pub fn success(id: Option<u64>, result: Value) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            id,
            kind: "response".into(),
            ok: true,
            result,
            error: None,
        }
    }

    pub fn failure(id: Option<u64>, code: ErrorCode, message: impl Into<String>, details: Value) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            id,
            kind: "response".into(),
            ok: false,
            result: Value::Null,
            error: Some(ErrorBody {
                code,
                message: message.into(),
                details,
            }),
        }
    }
}

/// Frame broadcast, `{kind: "frame", time, modules, events}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMsg {
    pub v: u32,
    pub kind: String,
    /// Session version the frames lead to.
    pub version: u64,
    pub time: f64,
    pub modules: Vec<ModuleRecord>,
    pub connections: Vec<ConnectionRecord>,
    pub events: Vec<String>,
}

impl FrameMsg {
    fn new(frame: &SimFrame, version: u64) -> Self {
        let r = FrameRecord::from_frame(frame);
        Self {
            v: PROTOCOL_VERSION,
            kind: "frame".into(),
            version,
            time: r.time,
            modules: r.modules,
            connections: r.connections,
            events: vec![r.event],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleSnapshot {
    pub id: u32,
    pub yaw: f64,
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
    pub theta_deg: f64,
    pub e0: u8,
    pub parent: Option<u32>,
    pub pending: bool,
    /// World footprint vertices A, B, C, D.
    pub polygon: Vec<[f64; 2]>,
}

/// Full tree state as served by `get_state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u64,
    pub root: u32,
    pub modules: Vec<ModuleSnapshot>,
    pub connections: Vec<ConnectionRecord>,
}

impl Snapshot {
    pub fn of(tree: &KTree, version: u64) -> Self {
        let poses = tree.world_poses();
        let pending = tree.pending();
        let modules = tree
            .modules()
            .map(|s| {
                let pose = poses[&s.id];
                ModuleSnapshot {
                    id: s.id.0,
                    yaw: pose.yaw,
                    x: pose.x,
                    y: pose.y,
                    sigma: s.sigma,
                    theta_deg: s.theta().to_degrees(),
                    e0: s.e0.value(),
                    parent: tree.parent_of(s.id).map(|(p, _)| p.0),
                    pending: pending == Some(s.id),
                    polygon: footprint(s, &pose).vertices().iter().map(|p| [p.x, p.y]).collect(),
                }
            })
            .collect();
        let frame = SimFrame::capture(tree, 0.0, rhombot_core::FrameEvent::Morph);
        Self {
            version,
            root: tree.root().0,
            modules,
            connections: FrameRecord::from_frame(&frame).connections,
        }
    }
}

#[derive(Debug, Clone)]
struct Proposal {
    base_version: u64,
    outcome: PivotOutcome,
}

#[derive(Debug, Clone)]
struct Loaded {
    tree: KTree,
    config: EngineConfig,
    defaults: EngineDefaults,
}

/// Reply to one request: the response plus any frames it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub response: Response,
    pub frames: Vec<FrameMsg>,
}

#[derive(Debug, Clone, Default)]
pub struct Session {
    loaded: Option<Loaded>,
    version: u64,
    history: VecDeque<KTree>,
    proposals: BTreeMap<u64, Proposal>,
    next_op_id: u64,
    log: Vec<Envelope>,
}

fn engine_details(e: &EngineError) -> Value {
    match e.root_cause() {
        EngineError::Collision { time, a, b } => json!({"collision": {"time": time, "a": a.0, "b": b.0}}),
        EngineError::DockingFailed(r) => json!({"report": report_json(r)}),
        EngineError::LoopBroken { time, a, b, position_offset, angular_offset } => json!({
            "loop_broken": {"time": time, "a": a.0, "b": b.0,
                "position_offset": position_offset, "angular_offset": angular_offset}
        }),
        _ => Value::Null,
    }
}

fn report_json(r: &rhombot_core::DockingReport) -> Value {
    json!({
        "position_offset": r.position_offset,
        "angular_offset": r.angular_offset,
        "pass": r.pass,
    })
}

impl Session {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn tree(&self) -> Option<&KTree> {
        self.loaded.as_ref().map(|l| &l.tree)
    }

    pub fn snapshot(&self) -> Option<Snapshot> {
        self.tree().map(|t| Snapshot::of(t, self.version))
    }

    /// Every request handled so far, in order.
    pub fn log(&self) -> &[Envelope] {
        &self.log
    }

    /// A fresh session fed `log` in order.
    pub fn replay(log: &[Envelope]) -> Self {
        let mut s = Self::new();
        for msg in log {
            s.handle(msg.clone());
        }
        s
    }

    pub fn handle(&mut self, msg: Envelope) -> Reply {
        let id = Some(msg.id);
        if msg.v != PROTOCOL_VERSION {
            return Reply {
                response: Response::failure(
                    id,
                    ErrorCode::UnsupportedVersion,
                    format!("protocol version {} not supported", msg.v),
                    json!({"supported": PROTOCOL_VERSION}),
                ),
                frames: Vec::new(),
            };
        }
        self.log.push(msg.clone());
        match self.dispatch(msg.request) {
            Ok((result, frames)) => Reply {
                response: Response::success(id, result),
                frames,
            },
            Err(body) => Reply {
                response: Response::failure(id, body.code, body.message, body.details),
                frames: Vec::new(),
            },
        }
    }

    fn loaded(&self) -> Result<&Loaded, ErrorBody> {
        self.loaded.as_ref().ok_or_else(|| ErrorBody {
            code: ErrorCode::NotLoaded,
            message: "no scenario loaded".into(),
            details: Value::Null,
        })
    }

    fn check_version(&self, expected: Option<u64>) -> Result<(), ErrorBody> {
        match expected {
            Some(v) if v != self.version => Err(self.conflict(format!(
                "state is at version {}, request was made against {v}",
                self.version
            ))),
            _ => Ok(()),
        }
    }

    fn conflict(&self, message: String) -> ErrorBody {
        ErrorBody {
            code: ErrorCode::Conflict,
            message,
            details: json!({"version": self.version}),
        }
    }

    /// Replaces the tree, remembering the old one for undo.
    fn advance(&mut self, tree: KTree) {
        let loaded = self.loaded.as_mut().expect("advance needs a loaded session");
        let old = std::mem::replace(&mut loaded.tree, tree);
        self.history.push_back(old);
        if self.history.len() > HISTORY_LIMIT {
            self.history.pop_front();
        }
        self.version += 1;
    }

    fn frames(&self, frames: &[SimFrame]) -> Vec<FrameMsg> {
        frames.iter().map(|f| FrameMsg::new(f, self.version)).collect()
    }

    fn dispatch(&mut self, req: Request) -> Result<(Value, Vec<FrameMsg>), ErrorBody> {
        let invalid = |message: String| ErrorBody {
            code: ErrorCode::Invalid,
            message,
            details: Value::Null,
        };
        match req {
            Request::Load { scenario: text } => {
                let doc = scenario::parse_scenario(&text).map_err(|e| invalid(e.to_string()))?;
                let tree = scenario::to_tree(&doc).map_err(|e| invalid(e.to_string()))?;
                let config = doc.defaults.to_config();
                self.loaded = Some(Loaded {
                    tree,
                    config,
                    defaults: doc.defaults,
                });
                self.history.clear();
                self.proposals.clear();
                self.version += 1;
                Ok((json!({"version": self.version, "modules": doc.modules.len()}), Vec::new()))
            }
            Request::GetState => {
                let l = self.loaded()?;
                Ok((json!(Snapshot::of(&l.tree, self.version)), Vec::new()))
            }
            Request::Propose { op, version } => {
                let l = self.loaded()?;
                self.check_version(version)?;
                let op = op
                    .to_op("op", l.config.morph_rate)
                    .map_err(|e| invalid(e.to_string()))?;
                let outcome = engine::morphpivot(&l.tree, &op, &l.config).map_err(|e| ErrorBody {
                    code: ErrorCode::Infeasible,
                    message: e.to_string(),
                    details: engine_details(&e),
                })?;
                let op_id = self.next_op_id;
                self.next_op_id += 1;
                let result = json!({
                    "op_id": op_id,
                    "base_version": self.version,
                    "report": report_json(&outcome.report),
                    "collision": Value::Null,
                    "frame_count": outcome.frames.len(),
                    "preview": Snapshot::of(&outcome.tree, self.version + 1),
                });
                self.proposals.insert(
                    op_id,
                    Proposal {
                        base_version: self.version,
                        outcome,
                    },
                );
                Ok((result, Vec::new()))
            }
            Request::Commit { op_id } => {
                self.loaded()?;
                let Some(p) = self.proposals.get(&op_id) else {
                    return Err(ErrorBody {
                        code: ErrorCode::Conflict,
                        message: format!("op {op_id} was never proposed"),
                        details: json!({"version": self.version, "op_id": op_id}),
                    });
                };
                if p.base_version != self.version {
                    return Err(self.conflict(format!(
                        "op {op_id} was proposed at version {}, state is at {}",
                        p.base_version, self.version
                    )));
                }
                if !p.outcome.report.pass {
                    return Err(ErrorBody {
                        code: ErrorCode::Infeasible,
                        message: format!("op {op_id} failed its docking check"),
                        details: json!({"report": report_json(&p.outcome.report)}),
                    });
                }
                let p = self.proposals.remove(&op_id).expect("checked above");
                self.advance(p.outcome.tree);
                let frames = self.frames(&p.outcome.frames);
                Ok((json!({"version": self.version, "report": report_json(&p.outcome.report)}), frames))
            }
            Request::SetTheta {
                module,
                theta_deg,
                version,
            } => {
                let l = self.loaded()?;
                self.check_version(version)?;
                let target = MorphTarget {
                    module: ModuleId(module),
                    theta: deg(theta_deg),
                    order: 0,
                };
                let out = engine::execute_morph(&l.tree, &[target], l.config.morph_rate, &l.config)
                    .map_err(|e| ErrorBody {
                        code: ErrorCode::Infeasible,
                        message: e.to_string(),
                        details: engine_details(&e),
                    })?;
                self.advance(out.tree);
                let frames = self.frames(&out.frames);
                Ok((json!({"version": self.version}), frames))
            }
            Request::Undo => {
                self.loaded()?;
                let Some(prev) = self.history.pop_back() else {
                    return Err(ErrorBody {
                        code: ErrorCode::NothingToUndo,
                        message: "history is empty".into(),
                        details: json!({"version": self.version}),
                    });
                };
                self.loaded.as_mut().expect("checked above").tree = prev;
                self.version += 1;
                Ok((json!({"version": self.version}), Vec::new()))
            }
            Request::SubscribeFrames { enabled } => Ok((json!({"subscribed": enabled}), Vec::new())),
        }
    }

    /// Scenario text for the current state.
    pub fn export(&self) -> Option<String> {
        self.loaded
            .as_ref()
            .map(|l| scenario::serialize_scenario(&scenario::from_tree(&l.tree, l.defaults)))
    }
}
