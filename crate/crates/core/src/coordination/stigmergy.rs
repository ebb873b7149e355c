use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use super::wire::{put_bytes16, put_str8, Reader, WireError};
use crate::netlink::{Envelope, MsgType, HEADER_LEN};
use crate::{AgentId, BROADCAST};

#[derive(Debug, Clone, PartialEq)]
pub enum StigValue {
    Int(i64),
    Real(f64),
    Str(String),
    Bytes(Vec<u8>),
}

impl StigValue {
    fn tag(&self) -> u8 {
        match self {
            StigValue::Int(_) => 0,
            StigValue::Real(_) => 1,
            StigValue::Str(_) => 2,
            StigValue::Bytes(_) => 3,
        }
    }

    fn write(&self, out: &mut Vec<u8>) -> Result<(), WireError> {
        out.push(self.tag());
        match self {
            StigValue::Int(v) => out.extend_from_slice(&v.to_le_bytes()),
            StigValue::Real(v) => out.extend_from_slice(&v.to_le_bytes()),
            StigValue::Str(s) => put_bytes16(out, s.as_bytes())?,
            StigValue::Bytes(b) => put_bytes16(out, b)?,
        }
        Ok(())
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(match r.u8()? {
            0 => StigValue::Int(r.i64()?),
            1 => StigValue::Real(r.f64()?),
            2 => StigValue::Str(r.str16()?),
            3 => StigValue::Bytes(r.bytes16()?),
            t => return Err(WireError::BadTag(t)),
        })
    }

    /// Total order used only to break exact version ties.
    fn tie_cmp(&self, other: &Self) -> Ordering {
        let mut a = Vec::new();
        let mut b = Vec::new();
        // values that do not encode compare by tag alone
        let _ = self.write(&mut a);
        let _ = other.write(&mut b);
        a.cmp(&b)
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            StigValue::Int(v) => Some(*v),
            StigValue::Real(v) if libm::trunc(*v) == *v => Some(*v as i64),
            _ => None,
        }
    }
}

/// One versioned key of the shared table. Conflicting writes are ordered by
/// `(lamport, origin)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StigEntry {
    pub key: String,
    pub value: StigValue,
    pub lamport: u32,
    pub origin: AgentId,
}

impl StigEntry {
    fn precedence(&self, other: &Self) -> Ordering {
        (self.lamport, self.origin)
            .cmp(&(other.lamport, other.origin))
            .then_with(|| self.value.tie_cmp(&other.value))
    }

    fn write(&self, out: &mut Vec<u8>) -> Result<(), WireError> {
        put_str8(out, &self.key)?;
        self.value.write(out)?;
        out.extend_from_slice(&self.lamport.to_le_bytes());
        out.extend_from_slice(&self.origin.to_le_bytes());
        Ok(())
    }

    fn encoded_len(&self) -> usize {
        let mut v = Vec::new();
        let _ = self.write(&mut v);
        v.len()
    }
}

/// Last-writer-wins join of two versions of the same key.
pub fn stig_merge(local: Option<&StigEntry>, remote: &StigEntry) -> StigEntry {
    match local {
        Some(l) if l.precedence(remote) != Ordering::Less => l.clone(),
        _ => remote.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StigError {
    EmptyKey,
    KeyTooLong,
    Wire(WireError),
}

impl fmt::Display for StigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StigError::EmptyKey => f.write_str("stigmergy keys must not be empty"),
            StigError::KeyTooLong => f.write_str("stigmergy keys are limited to 255 bytes"),
            StigError::Wire(e) => write!(f, "malformed stigmergy update: {e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for StigError {}

impl From<WireError> for StigError {
    fn from(e: WireError) -> Self {
        StigError::Wire(e)
    }
}

/// `count u16`, then per record `key-len u8, key, tag u8, value, lamport
/// u32, origin u16`.
pub fn encode_update(entries: &[StigEntry]) -> Result<Vec<u8>, WireError> {
    let count = u16::try_from(entries.len()).map_err(|_| WireError::TooLong)?;
    let mut out = Vec::new();
    out.extend_from_slice(&count.to_le_bytes());
    for e in entries {
        e.write(&mut out)?;
    }
    Ok(out)
}

pub fn decode_update(payload: &[u8]) -> Result<Vec<StigEntry>, WireError> {
    let mut r = Reader::new(payload);
    let count = r.u16()?;
    let mut out = Vec::with_capacity(usize::from(count).min(256));
    for _ in 0..count {
        let key = r.str8()?;
        let value = StigValue::read(&mut r)?;
        let lamport = r.u32()?;
        let origin = r.u16()?;
        out.push(StigEntry {
            key,
            value,
            lamport,
            origin,
        });
    }
    r.finish()?;
    Ok(out)
}

/// One agent's replica of the stigmergy.
#[derive(Debug, Clone)]
pub struct StigTable {
    self_id: AgentId,
    entries: BTreeMap<String, StigEntry>,
    dirty: BTreeSet<String>,
    clock: u32,
    next_gossip: u64,
}

impl StigTable {
    pub fn new(self_id: AgentId) -> Self {
        Self {
            self_id,
            entries: BTreeMap::new(),
            dirty: BTreeSet::new(),
            clock: 0,
            next_gossip: 0,
        }
    }

    pub fn self_id(&self) -> AgentId {
        self.self_id
    }

    /// Preloads a configuration value at version `(0, 0)`; any write wins
    /// over it and it is never gossiped.
    pub fn preload(&mut self, key: &str, value: StigValue) {
        self.entries.insert(
            String::from(key),
            StigEntry {
                key: String::from(key),
                value,
                lamport: 0,
                origin: 0,
            },
        );
    }

    pub fn put(&mut self, key: &str, value: StigValue) -> Result<StigEntry, StigError> {
        if key.is_empty() {
            return Err(StigError::EmptyKey);
        }
        if key.len() > usize::from(u8::MAX) {
            return Err(StigError::KeyTooLong);
        }
        self.clock += 1;
        let entry = StigEntry {
            key: String::from(key),
            value,
            lamport: self.clock,
            origin: self.self_id,
        };
        self.entries.insert(String::from(key), entry.clone());
        self.dirty.insert(String::from(key));
        Ok(entry)
    }

    pub fn get(&self, key: &str) -> Option<&StigValue> {
        self.entries.get(key).map(|e| &e.value)
    }

    pub fn entry(&self, key: &str) -> Option<&StigEntry> {
        self.entries.get(key)
    }

    pub fn entries(&self) -> impl Iterator<Item = &StigEntry> {
        self.entries.values()
    }

    pub fn dirty_count(&self) -> usize {
        self.dirty.len()
    }

    pub fn lamport(&self) -> u32 {
        self.clock
    }

    /// Merges a remote version. Returns `true` if the local winner changed.
    /// Remote entries are not re-gossiped.
    pub fn merge(&mut self, remote: StigEntry) -> bool {
        self.clock = self.clock.max(remote.lamport);
        let local = self.entries.get(&remote.key);
        let merged = stig_merge(local, &remote);
        if local == Some(&merged) {
            return false;
        }
        self.entries.insert(merged.key.clone(), merged);
        true
    }

    pub fn apply_update(&mut self, payload: &[u8]) -> Result<usize, StigError> {
        let entries = decode_update(payload)?;
        Ok(entries.into_iter().filter(|e| self.merge(e.clone())).count())
    }

    /// Once every `period_ticks`, packs the dirty entries into one broadcast
    /// `StigUpdate` envelope and clears their flags. Entries that do not
    /// fit in one frame stay dirty for the next period.
    pub fn gossip_tick(&mut self, now: u64, period_ticks: u64) -> Option<Envelope> {
        if now < self.next_gossip {
            return None;
        }
        let period = period_ticks.max(1);
        self.next_gossip = (now / period + 1) * period;
        if self.dirty.is_empty() {
            return None;
        }
        let budget = usize::from(u16::MAX) - HEADER_LEN - 2;
        let mut used = 0;
        let mut batch = Vec::new();
        for key in &self.dirty {
            let e = &self.entries[key];
            let len = e.encoded_len();
            if used + len > budget {
                break;
            }
            used += len;
            batch.push(e.clone());
        }
        for e in &batch {
            self.dirty.remove(&e.key);
        }
        let payload = encode_update(&batch).ok()?;
        Envelope::new(self.self_id, BROADCAST, MsgType::StigUpdate, payload)
    }
}
