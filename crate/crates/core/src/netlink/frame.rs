use alloc::vec::Vec;
use core::fmt;

use crate::{AgentId, BROADCAST};

/// `source u16 | dest u16 | type u8 | len u16`, little-endian.
pub const HEADER_LEN: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[repr(u8)]
pub enum MsgType {
    StigUpdate = 1,
    ActionCall = 2,
    ActionResult = 3,
    ManifestAnnounce = 4,
    SyncFrame = 5,
    UserBroadcast = 6,
}

impl TryFrom<u8> for MsgType {
    type Error = DecodeError;

    fn try_from(v: u8) -> Result<Self, DecodeError> {
        Ok(match v {
            1 => MsgType::StigUpdate,
            2 => MsgType::ActionCall,
            3 => MsgType::ActionResult,
            4 => MsgType::ManifestAnnounce,
            5 => MsgType::SyncFrame,
            6 => MsgType::UserBroadcast,
            other => return Err(DecodeError::UnknownType(other)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub source: AgentId,
    pub dest: AgentId,
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

impl Envelope {
    /// Returns `None` when the source is the broadcast id or the payload
    /// does not fit the 16-bit length field.
    pub fn new(source: AgentId, dest: AgentId, msg_type: MsgType, payload: Vec<u8>) -> Option<Self> {
        if source == BROADCAST || payload.len() > usize::from(u16::MAX) {
            return None;
        }
        Some(Self {
            source,
            dest,
            msg_type,
            payload,
        })
    }

    pub fn is_broadcast(&self) -> bool {
        self.dest == BROADCAST
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeError {
    Truncated { len: usize },
    LengthMismatch { declared: usize, actual: usize },
    UnknownType(u8),
    BroadcastSource,
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::Truncated { len } => write!(f, "frame of {len} bytes is shorter than the header"),
            DecodeError::LengthMismatch { declared, actual } => {
                write!(f, "header declares {declared} payload bytes, frame carries {actual}")
            }
            DecodeError::UnknownType(t) => write!(f, "unknown message type {t}"),
            DecodeError::BroadcastSource => f.write_str("source id is the broadcast id"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DecodeError {}

pub fn encode(e: &Envelope) -> Vec<u8> {
    let mut out = Vec::with_capacity(e.encoded_len());
    out.extend_from_slice(&e.source.to_le_bytes());
    out.extend_from_slice(&e.dest.to_le_bytes());
    out.push(e.msg_type as u8);
    out.extend_from_slice(&(e.payload.len() as u16).to_le_bytes());
    out.extend_from_slice(&e.payload);
    out
}

pub fn decode(buf: &[u8]) -> Result<Envelope, DecodeError> {
    if buf.len() < HEADER_LEN {
        return Err(DecodeError::Truncated { len: buf.len() });
    }
    let source = u16::from_le_bytes([buf[0], buf[1]]);
    let dest = u16::from_le_bytes([buf[2], buf[3]]);
    let msg_type = MsgType::try_from(buf[4])?;
    let declared = usize::from(u16::from_le_bytes([buf[5], buf[6]]));
    let actual = buf.len() - HEADER_LEN;
    if declared != actual {
        return Err(DecodeError::LengthMismatch { declared, actual });
    }
    if source == BROADCAST {
        return Err(DecodeError::BroadcastSource);
    }
    Ok(Envelope {
        source,
        dest,
        msg_type,
        payload: buf[HEADER_LEN..].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn empty_payload_is_header_only() {
        let e = Envelope::new(1, 2, MsgType::UserBroadcast, vec![]).unwrap();
        let bytes = encode(&e);
        assert_eq!(bytes, [1, 0, 2, 0, 6, 0, 0]);
        assert_eq!(decode(&bytes).unwrap(), e);
    }

    #[test]
    fn little_endian_layout() {
        let e = Envelope::new(0x0102, BROADCAST, MsgType::StigUpdate, vec![0xAA, 0xBB]).unwrap();
        assert_eq!(encode(&e), [0x02, 0x01, 0xFF, 0xFF, 1, 2, 0, 0xAA, 0xBB]);
    }

    #[test]
    fn malformed_frames() {
        let mut bytes = vec![1, 0, 2, 0, 2, 5, 0];
        bytes.extend_from_slice(&[1, 2, 3]);
        assert_eq!(
            decode(&bytes),
            Err(DecodeError::LengthMismatch { declared: 5, actual: 3 })
        );
        assert_eq!(decode(&[1, 0, 2]), Err(DecodeError::Truncated { len: 3 }));
        assert_eq!(decode(&[1, 0, 2, 0, 9, 0, 0]), Err(DecodeError::UnknownType(9)));
        assert_eq!(decode(&[0xFF, 0xFF, 2, 0, 1, 0, 0]), Err(DecodeError::BroadcastSource));
    }

    #[test]
    fn constructor_rejects_invalid() {
        assert!(Envelope::new(BROADCAST, 1, MsgType::ActionCall, vec![]).is_none());
        assert!(Envelope::new(1, 1, MsgType::ActionCall, vec![0; 70_000]).is_none());
    }
}
