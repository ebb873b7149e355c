use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::wire::{put_bytes16, put_str8, Reader, WireError};
use crate::netlink::{Envelope, MsgType};
use crate::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamType {
    Int,
    Real,
    Str,
}

impl ParamType {
    fn tag(self) -> u8 {
        match self {
            ParamType::Int => 0,
            ParamType::Real => 1,
            ParamType::Str => 2,
        }
    }

    fn from_tag(t: u8) -> Result<Self, WireError> {
        Ok(match t {
            0 => ParamType::Int,
            1 => ParamType::Real,
            2 => ParamType::Str,
            t => return Err(WireError::BadTag(t)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub ty: ParamType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpec {
    pub name: String,
    pub params: Vec<ParamSpec>,
}

/// The callbacks a host exposes to the swarm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionManifest {
    pub agent: AgentId,
    actions: Vec<ActionSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArgValue {
    Int(i64),
    Real(f64),
    Str(String),
}

impl ArgValue {
    /// Numeric view; integers widen to reals.
    pub fn as_real(&self) -> Option<f64> {
        match self {
            ArgValue::Int(v) => Some(*v as f64),
            ArgValue::Real(v) => Some(*v),
            ArgValue::Str(_) => None,
        }
    }

    fn fits(&self, ty: ParamType) -> bool {
        matches!(
            (self, ty),
            (ArgValue::Int(_), ParamType::Int | ParamType::Real)
                | (ArgValue::Real(_), ParamType::Real)
                | (ArgValue::Str(_), ParamType::Str)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallError {
    DuplicateAction(String),
    UnknownAgent(AgentId),
    UnknownAction(String),
    Arity { expected: usize, got: usize },
    ArgType { index: usize, expected: ParamType },
    Wire(WireError),
}

impl fmt::Display for CallError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CallError::DuplicateAction(n) => write!(f, "action {n:?} declared twice"),
            CallError::UnknownAgent(id) => write!(f, "no manifest known for agent {id}"),
            CallError::UnknownAction(n) => write!(f, "action {n:?} is not in the manifest"),
            CallError::Arity { expected, got } => {
                write!(f, "expected {expected} arguments, got {got}")
            }
            CallError::ArgType { index, expected } => {
                write!(f, "argument {index} must be {expected:?}")
            }
            CallError::Wire(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CallError {}

impl From<WireError> for CallError {
    fn from(e: WireError) -> Self {
        CallError::Wire(e)
    }
}

impl ActionManifest {
    pub fn new(agent: AgentId, actions: Vec<ActionSpec>) -> Result<Self, CallError> {
        for (i, a) in actions.iter().enumerate() {
            if actions[..i].iter().any(|b| b.name == a.name) {
                return Err(CallError::DuplicateAction(a.name.clone()));
            }
        }
        Ok(Self { agent, actions })
    }

    pub fn actions(&self) -> &[ActionSpec] {
        &self.actions
    }

    pub fn action(&self, name: &str) -> Option<&ActionSpec> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn validate_call(&self, name: &str, args: &[ArgValue]) -> Result<(), CallError> {
        let spec = self
            .action(name)
            .ok_or_else(|| CallError::UnknownAction(String::from(name)))?;
        if spec.params.len() != args.len() {
            return Err(CallError::Arity {
                expected: spec.params.len(),
                got: args.len(),
            });
        }
        for (index, (p, a)) in spec.params.iter().zip(args).enumerate() {
            if !a.fits(p.ty) {
                return Err(CallError::ArgType { index, expected: p.ty });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionCall {
    pub call_id: u32,
    pub name: String,
    pub args: Vec<ArgValue>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionResult {
    pub call_id: u32,
    pub ok: bool,
    pub message: String,
}

/// `count u8`, then per action `name (u8 len)`, `param count u8`, and per
/// param `name (u8 len)`, `type u8`.
pub fn encode_manifest(m: &ActionManifest) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::new();
    out.push(u8::try_from(m.actions.len()).map_err(|_| WireError::TooLong)?);
    for a in &m.actions {
        put_str8(&mut out, &a.name)?;
        out.push(u8::try_from(a.params.len()).map_err(|_| WireError::TooLong)?);
        for p in &a.params {
            put_str8(&mut out, &p.name)?;
            out.push(p.ty.tag());
        }
    }
    Ok(out)
}

pub fn decode_manifest(agent: AgentId, payload: &[u8]) -> Result<ActionManifest, CallError> {
    let mut r = Reader::new(payload);
    let n = r.u8()?;
    let mut actions = Vec::with_capacity(usize::from(n));
    for _ in 0..n {
        let name = r.str8()?;
        let np = r.u8()?;
        let mut params = Vec::with_capacity(usize::from(np));
        for _ in 0..np {
            let pname = r.str8()?;
            let ty = ParamType::from_tag(r.u8()?)?;
            params.push(ParamSpec { name: pname, ty });
        }
        actions.push(ActionSpec { name, params });
    }
    r.finish()?;
    ActionManifest::new(agent, actions)
}

/// `call_id u32`, `name (u8 len)`, `argc u8`, then tagged arguments
/// (int: i64, real: f64, string: u16 len + bytes).
pub fn encode_call(c: &ActionCall) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::new();
    out.extend_from_slice(&c.call_id.to_le_bytes());
    put_str8(&mut out, &c.name)?;
    out.push(u8::try_from(c.args.len()).map_err(|_| WireError::TooLong)?);
    for a in &c.args {
        match a {
            ArgValue::Int(v) => {
                out.push(ParamType::Int.tag());
                out.extend_from_slice(&v.to_le_bytes());
            }
            ArgValue::Real(v) => {
                out.push(ParamType::Real.tag());
                out.extend_from_slice(&v.to_le_bytes());
            }
            ArgValue::Str(s) => {
                out.push(ParamType::Str.tag());
                put_bytes16(&mut out, s.as_bytes())?;
            }
        }
    }
    Ok(out)
}

pub fn decode_call(payload: &[u8]) -> Result<ActionCall, WireError> {
    let mut r = Reader::new(payload);
    let call_id = r.u32()?;
    let name = r.str8()?;
    let argc = r.u8()?;
    let mut args = Vec::with_capacity(usize::from(argc));
    for _ in 0..argc {
        args.push(match ParamType::from_tag(r.u8()?)? {
            ParamType::Int => ArgValue::Int(r.i64()?),
            ParamType::Real => ArgValue::Real(r.f64()?),
            ParamType::Str => ArgValue::Str(r.str16()?),
        });
    }
    r.finish()?;
    Ok(ActionCall { call_id, name, args })
}

/// `call_id u32`, `status u8` (0 = ok), `message (u16 len)`.
pub fn encode_result(res: &ActionResult) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::new();
    out.extend_from_slice(&res.call_id.to_le_bytes());
    out.push(if res.ok { 0 } else { 1 });
    put_bytes16(&mut out, res.message.as_bytes())?;
    Ok(out)
}

pub fn decode_result(payload: &[u8]) -> Result<ActionResult, WireError> {
    let mut r = Reader::new(payload);
    let call_id = r.u32()?;
    let ok = match r.u8()? {
        0 => true,
        1 => false,
        t => return Err(WireError::BadTag(t)),
    };
    let message = r.str16()?;
    r.finish()?;
    Ok(ActionResult { call_id, ok, message })
}

/// Manifests announced by other hosts, as known to one caller.
#[derive(Debug, Clone, Default)]
pub struct ManifestRegistry {
    known: BTreeMap<AgentId, ActionManifest>,
    next_call_id: u32,
}

impl ManifestRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, m: ActionManifest) {
        self.known.insert(m.agent, m);
    }

    pub fn get(&self, agent: AgentId) -> Option<&ActionManifest> {
        self.known.get(&agent)
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.known.keys().copied()
    }

    /// Validates a call against the target's manifest and builds the
    /// unicast `ActionCall` envelope. Nothing is produced on failure.
    pub fn prepare_call(
        &mut self,
        caller: AgentId,
        target: AgentId,
        name: &str,
        args: Vec<ArgValue>,
    ) -> Result<(u32, Envelope), CallError> {
        let manifest = self.known.get(&target).ok_or(CallError::UnknownAgent(target))?;
        manifest.validate_call(name, &args)?;
        self.next_call_id = self.next_call_id.wrapping_add(1);
        let call = ActionCall {
            call_id: self.next_call_id,
            name: String::from(name),
            args,
        };
        let payload = encode_call(&call)?;
        let env =
            Envelope::new(caller, target, MsgType::ActionCall, payload).ok_or(CallError::Wire(WireError::TooLong))?;
        Ok((call.call_id, env))
    }
}
