//! Control protocol: operator commands, replies and snapshots, as JSON
//! objects tagged by `type`.

use std::collections::BTreeMap;

use hive_core::coordination::{ArgValue, StigValue};
use hive_core::AgentId;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::scenario::ActionDecl;

/// A table or argument value. Integers stay integers; `{"bytes": [..]}`
/// carries raw bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonValue {
    Int(i64),
    Real(f64),
    Str(String),
    Bytes { bytes: Vec<u8> },
}

impl JsonValue {
    pub fn to_stig(&self) -> Option<StigValue> {
        Some(match self {
            JsonValue::Int(v) => StigValue::Int(*v),
            JsonValue::Real(v) => StigValue::Real(*v),
            JsonValue::Str(s) => StigValue::Str(s.clone()),
            JsonValue::Bytes { bytes } => StigValue::Bytes(bytes.clone()),
        })
    }

    pub fn to_arg(&self) -> Option<ArgValue> {
        match self {
            JsonValue::Int(v) => Some(ArgValue::Int(*v)),
            JsonValue::Real(v) => Some(ArgValue::Real(*v)),
            JsonValue::Str(s) => Some(ArgValue::Str(s.clone())),
            JsonValue::Bytes { .. } => None,
        }
    }
}

impl From<&StigValue> for JsonValue {
    fn from(v: &StigValue) -> Self {
        match v {
            StigValue::Int(v) => JsonValue::Int(*v),
            StigValue::Real(v) => JsonValue::Real(*v),
            StigValue::Str(s) => JsonValue::Str(s.clone()),
            StigValue::Bytes(b) => JsonValue::Bytes { bytes: b.clone() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    ListAgents,
    GetManifest {
        agent: AgentId,
    },
    CallAction {
        target: AgentId,
        name: String,
        #[serde(default)]
        args: Vec<JsonValue>,
    },
    Broadcast {
        payload: String,
    },
    SetStig {
        key: String,
        value: JsonValue,
    },
    /// Shorthand for `set_stig` on the `leader` key.
    SetLeader {
        agent: AgentId,
    },
    Pause,
    Resume,
    SetSnapshotRate {
        hz: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ListAgents => "list_agents",
            Command::GetManifest { .. } => "get_manifest",
            Command::CallAction { .. } => "call_action",
            Command::Broadcast { .. } => "broadcast",
            Command::SetStig { .. } => "set_stig",
            Command::SetLeader { .. } => "set_leader",
            Command::Pause => "pause",
            Command::Resume => "resume",
            Command::SetSnapshotRate { .. } => "set_snapshot_rate",
        }
    }

    /// Commands that only read state or steer the service itself; they
    /// are answered even while the world is paused.
    pub fn is_control(&self) -> bool {
        matches!(
            self,
            Command::ListAgents
                | Command::GetManifest { .. }
                | Command::Pause
                | Command::Resume
                | Command::SetSnapshotRate { .. }
        )
    }
}

/// A parsed incoming frame: the command plus the optional client
/// correlation number `req`, echoed on every reply.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub req: Option<u64>,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseFailure {
    pub req: Option<u64>,
    pub message: String,
}

impl ParseFailure {
    pub fn reply(self) -> Reply {
        Reply::Error {
            req: self.req,
            message: self.message,
        }
    }
}

pub fn parse_request(text: &str) -> Result<Request, ParseFailure> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| ParseFailure {
        req: None,
        message: format!("malformed frame: {e}"),
    })?;
    let Some(obj) = value.as_object_mut() else {
        return Err(ParseFailure {
            req: None,
            message: "frame must be a JSON object".into(),
        });
    };
    let req = match obj.remove("req") {
        None | Some(Value::Null) => None,
        Some(v) => Some(v.as_u64().ok_or_else(|| ParseFailure {
            req: None,
            message: "req must be a non-negative integer".into(),
        })?),
    };
    // serde ignores extra keys on unit variants of a tagged enum
    let extra = obj.keys().find(|k| *k != "type").cloned();
    let command: Command = serde_json::from_value(value).map_err(|e| ParseFailure {
        req,
        message: format!("invalid command: {e}"),
    })?;
    if let (Command::ListAgents | Command::Pause | Command::Resume, Some(key)) = (&command, extra) {
        return Err(ParseFailure {
            req,
            message: format!("invalid command: unknown field `{key}`"),
        });
    }
    Ok(Request { req, command })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseView {
    pub x_m: f64,
    pub y_m: f64,
    pub heading_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborView {
    pub id: AgentId,
    pub distance_m: f64,
    pub bearing_rad: f64,
    pub confidence: f64,
    pub age_ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentView {
    pub id: AgentId,
    pub pose: PoseView,
    /// Motion state: leading, following, holding, moving, stopped, idle
    /// or driving.
    pub status: String,
    pub loc_state: String,
    pub leader: Option<AgentId>,
    pub leader_distance_m: Option<f64>,
    pub neighbors: Vec<NeighborView>,
    pub last_broadcast: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub collisions: u64,
    pub drops: u64,
    pub unroutable: u64,
    pub delivered: u64,
    pub radio_bytes: u64,
    /// Radio bytes per second over the last metrics window.
    pub bandwidth_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    pub sim_time_s: f64,
    pub paused: bool,
    pub agents: Vec<AgentView>,
    /// The operator gateway's replica.
    pub stigmergy: BTreeMap<String, JsonValue>,
    pub counters: Counters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentInfo {
    pub id: AgentId,
    pub actions: Vec<ActionDecl>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reply {
    Ack {
        req: Option<u64>,
        command: String,
        tick: u64,
        /// Set for `call_action`; the matching `action_result` carries it.
        #[serde(skip_serializing_if = "Option::is_none", default)]
        call_id: Option<u32>,
    },
    Error {
        req: Option<u64>,
        message: String,
    },
    Agents {
        req: Option<u64>,
        tick: u64,
        agents: Vec<AgentInfo>,
    },
    Manifest {
        req: Option<u64>,
        tick: u64,
        agent: AgentId,
        actions: Vec<ActionDecl>,
    },
    ActionResult {
        req: Option<u64>,
        call_id: u32,
        target: AgentId,
        ok: bool,
        message: String,
        tick: u64,
    },
    Snapshot(Snapshot),
}

impl Reply {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("replies always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_command() {
        let cases = [
            (r#"{"type":"list_agents"}"#, Command::ListAgents),
            (
                r#"{"type":"get_manifest","agent":2}"#,
                Command::GetManifest { agent: 2 },
            ),
            (
                r#"{"type":"call_action","target":2,"name":"moveBy","args":[1.0, 0, "x"]}"#,
                Command::CallAction {
                    target: 2,
                    name: "moveBy".into(),
                    args: vec![JsonValue::Real(1.0), JsonValue::Int(0), JsonValue::Str("x".into())],
                },
            ),
            (
                r#"{"type":"broadcast","payload":"go"}"#,
                Command::Broadcast { payload: "go".into() },
            ),
            (
                r#"{"type":"set_stig","key":"k","value":{"bytes":[1,2]}}"#,
                Command::SetStig {
                    key: "k".into(),
                    value: JsonValue::Bytes { bytes: vec![1, 2] },
                },
            ),
            (r#"{"type":"set_leader","agent":3}"#, Command::SetLeader { agent: 3 }),
            (r#"{"type":"pause"}"#, Command::Pause),
            (r#"{"type":"resume"}"#, Command::Resume),
            (
                r#"{"type":"set_snapshot_rate","hz":2.5}"#,
                Command::SetSnapshotRate { hz: 2.5 },
            ),
        ];
        for (text, want) in cases {
            let r = parse_request(text).unwrap();
            assert_eq!(r.command, want);
            assert_eq!(r.req, None);
            let back = serde_json::to_string(&r.command).unwrap();
            assert_eq!(parse_request(&back).unwrap().command, r.command);
        }
    }

    #[test]
    fn req_is_extracted() {
        let r = parse_request(r#"{"req": 9, "type":"pause"}"#).unwrap();
        assert_eq!(r.req, Some(9));
    }

    #[test]
    fn malformed_frames_fail_softly() {
        assert!(parse_request("{nope").is_err());
        assert!(parse_request("[1]").is_err());
        let e = parse_request(r#"{"req": 4, "type":"fly"}"#).unwrap_err();
        assert_eq!(e.req, Some(4));
        assert!(parse_request(r#"{"type":"pause","extra":1}"#).is_err());
    }

    #[test]
    fn replies_are_tagged() {
        let r = Reply::Ack {
            req: Some(1),
            command: "pause".into(),
            tick: 5,
            call_id: None,
        };
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["type"], "ack");
        assert_eq!(v["tick"], 5);
        assert!(v.get("call_id").is_none());
    }
}
