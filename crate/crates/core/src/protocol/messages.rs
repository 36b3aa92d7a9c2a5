//! Typed views of the wire messages.
//!
//! | tag | 0x01 | 0x02 |
//! |-----|------|------|
//! | Hello | username | |
//! | GridOffer | session id | grid, 36 bytes row-major |
//! | Credentials | session id | PBTA response |
//! | Challenge | session id | signcrypted payload |
//! | Response | session id | `R_r`, 32 bytes |
//! | Result | session id | status, 0 = ok |
//! | Reject | session id | reason code |

use alloc::vec;
use alloc::vec::Vec;

use crate::pbta::{PbtaError, PbtaGrid, PbtaResponse};
use crate::terms::{decode_message, encode_message, CodecError, Digest, MessageTag, ProtocolMessage, SessionId};

const F1: u8 = 0x01;
const F2: u8 = 0x02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum RejectReason {
    Credentials = 0x01,
    Response = 0x02,
    Expired = 0x03,
    Replay = 0x04,
    State = 0x05,
}

impl RejectReason {
    pub fn from_code(b: u8) -> Option<Self> {
        Some(match b {
            0x01 => RejectReason::Credentials,
            0x02 => RejectReason::Response,
            0x03 => RejectReason::Expired,
            0x04 => RejectReason::Replay,
            0x05 => RejectReason::State,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            RejectReason::Credentials => "credentials",
            RejectReason::Response => "response",
            RejectReason::Expired => "expired",
            RejectReason::Replay => "replay",
            RejectReason::State => "state",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Hello { username: Vec<u8> },
    GridOffer { session_id: SessionId, grid: PbtaGrid },
    Credentials { session_id: SessionId, response: PbtaResponse },
    Challenge { session_id: SessionId, payload: Vec<u8> },
    Response { session_id: SessionId, rr: Digest },
    Result { session_id: SessionId, status: u8 },
    Reject { session_id: SessionId, reason: RejectReason },
}

impl Message {
    pub fn tag(&self) -> MessageTag {
        match self {
            Message::Hello { .. } => MessageTag::Hello,
            Message::GridOffer { .. } => MessageTag::GridOffer,
            Message::Credentials { .. } => MessageTag::Credentials,
            Message::Challenge { .. } => MessageTag::Challenge,
            Message::Response { .. } => MessageTag::Response,
            Message::Result { .. } => MessageTag::Result,
            Message::Reject { .. } => MessageTag::Reject,
        }
    }

    pub fn session_id(&self) -> Option<SessionId> {
        match self {
            Message::Hello { .. } => None,
            Message::GridOffer { session_id, .. }
            | Message::Credentials { session_id, .. }
            | Message::Challenge { session_id, .. }
            | Message::Response { session_id, .. }
            | Message::Result { session_id, .. }
            | Message::Reject { session_id, .. } => Some(*session_id),
        }
    }

    pub fn to_protocol(&self) -> ProtocolMessage {
        let sid = |s: &SessionId| s.as_bytes().to_vec();
        let fields = match self {
            Message::Hello { username } => vec![(F1, username.clone())],
            Message::GridOffer { session_id, grid } => vec![(F1, sid(session_id)), (F2, grid.as_bytes().to_vec())],
            Message::Credentials { session_id, response } => {
                vec![(F1, sid(session_id)), (F2, response.as_bytes().to_vec())]
            }
            Message::Challenge { session_id, payload } => vec![(F1, sid(session_id)), (F2, payload.clone())],
            Message::Response { session_id, rr } => vec![(F1, sid(session_id)), (F2, rr.as_bytes().to_vec())],
            Message::Result { session_id, status } => vec![(F1, sid(session_id)), (F2, vec![*status])],
            Message::Reject { session_id, reason } => vec![(F1, sid(session_id)), (F2, vec![*reason as u8])],
        };
        ProtocolMessage::new(self.tag(), fields).expect("typed messages are canonical and small")
    }

    pub fn from_protocol(m: &ProtocolMessage) -> Result<Self, CodecError> {
        let sid = || SessionId::from_slice(m.require(F1)?).map_err(|_| CodecError::Field(F1));
        let f2 = || m.require(F2);
        let bad2 = |_: PbtaError| CodecError::Field(F2);
        let expected_fields = if m.tag() == MessageTag::Hello { 1 } else { 2 };
        if m.fields().len() != expected_fields {
            return Err(CodecError::Field(if m.fields().is_empty() { F1 } else { F2 }));
        }
        Ok(match m.tag() {
            MessageTag::Hello => {
                let username = m.require(F1)?;
                if username.is_empty() || username.len() > 64 {
                    return Err(CodecError::Field(F1));
                }
                Message::Hello { username: username.to_vec() }
            }
            MessageTag::GridOffer => Message::GridOffer {
                session_id: sid()?,
                grid: PbtaGrid::from_bytes(f2()?).map_err(bad2)?,
            },
            MessageTag::Credentials => Message::Credentials {
                session_id: sid()?,
                response: PbtaResponse::new(f2()?).map_err(bad2)?,
            },
            MessageTag::Challenge => Message::Challenge { session_id: sid()?, payload: f2()?.to_vec() },
            MessageTag::Response => Message::Response {
                session_id: sid()?,
                rr: Digest::from_slice(f2()?).map_err(|_| CodecError::Field(F2))?,
            },
            MessageTag::Result => match f2()? {
                [status] => Message::Result { session_id: sid()?, status: *status },
                _ => return Err(CodecError::Field(F2)),
            },
            MessageTag::Reject => match f2()? {
                [code] => Message::Reject {
                    session_id: sid()?,
                    reason: RejectReason::from_code(*code).ok_or(CodecError::Field(F2))?,
                },
                _ => return Err(CodecError::Field(F2)),
            },
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        encode_message(&self.to_protocol())
    }

    pub fn decode(b: &[u8]) -> Result<Self, CodecError> {
        Self::from_protocol(&decode_message(b)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn typed_roundtrip() {
        let sid = SessionId::new([9; 16]);
        let msgs = [
            Message::Hello { username: b"alice".to_vec() },
            Message::GridOffer { session_id: sid, grid: PbtaGrid::identity() },
            Message::Credentials { session_id: sid, response: PbtaResponse::new("CE").unwrap() },
            Message::Challenge { session_id: sid, payload: vec![1, 2, 3] },
            Message::Response { session_id: sid, rr: Digest::new([4; 32]) },
            Message::Result { session_id: sid, status: 0 },
            Message::Reject { session_id: sid, reason: RejectReason::Replay },
        ];
        for m in msgs {
            assert_eq!(Message::decode(&m.encode()).unwrap(), m);
        }
    }

    #[test]
    fn grid_offer_bytes() {
        let sid = SessionId::new([0xAB; 16]);
        let enc = Message::GridOffer { session_id: sid, grid: PbtaGrid::identity() }.encode();
        assert_eq!(&enc[..5], &[0x02, 0x02, 0x01, 0x00, 0x10]);
        assert_eq!(&enc[21..24], &[0x02, 0x00, 0x24]);
        assert_eq!(&enc[24..], b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789");
    }

    #[test]
    fn rejects_missing_or_extra_fields() {
        let m = ProtocolMessage::new(MessageTag::Response, vec![(1, vec![0; 16])]).unwrap();
        assert!(Message::from_protocol(&m).is_err());
        let m = ProtocolMessage::new(MessageTag::Reject, vec![(1, vec![0; 16]), (2, vec![9])]).unwrap();
        assert_eq!(Message::from_protocol(&m), Err(CodecError::Field(2)));
        let m = ProtocolMessage::new(MessageTag::Hello, vec![(1, b"a".to_vec()), (2, vec![])]).unwrap();
        assert!(Message::from_protocol(&m).is_err());
    }
}
