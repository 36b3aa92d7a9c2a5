//! Bit-exact TLV wire format.
//!
//! ```text
//! tag:u8  count:u8  { field_id:u8  len:u16be  value[len] }*count
//! ```
//!
//! Field ids must be strictly ascending. Anything else is rejected on
//! decode, so every accepted byte string has exactly one encoding.

use alloc::vec::Vec;

use super::MAX_PART_LEN;

/// One-byte field identifier within a message.
pub type FieldId = u8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum MessageTag {
    Hello = 0x01,
    GridOffer = 0x02,
    Credentials = 0x03,
    Challenge = 0x04,
    Response = 0x05,
    Result = 0x06,
    Reject = 0x07,
}

impl MessageTag {
    pub const ALL: [MessageTag; 7] = [
        MessageTag::Hello,
        MessageTag::GridOffer,
        MessageTag::Credentials,
        MessageTag::Challenge,
        MessageTag::Response,
        MessageTag::Result,
        MessageTag::Reject,
    ];

    pub fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| *t as u8 == b)
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageTag::Hello => "Hello",
            MessageTag::GridOffer => "GridOffer",
            MessageTag::Credentials => "Credentials",
            MessageTag::Challenge => "Challenge",
            MessageTag::Response => "Response",
            MessageTag::Result => "Result",
            MessageTag::Reject => "Reject",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("input truncated")]
    Truncation,
    #[error("unknown message tag {0:#04x}")]
    UnknownTag(u8),
    #[error("field ids not strictly ascending")]
    Canonicality,
    #[error("{0} trailing bytes after message")]
    TrailingBytes(usize),
    #[error("field of {0} bytes exceeds the 65535-byte limit")]
    FieldTooLong(usize),
    #[error("more than 255 fields")]
    TooManyFields,
    #[error("missing or malformed field {0:#04x}")]
    Field(FieldId),
    #[error("expected a {expected} message, got {got}")]
    UnexpectedTag { expected: &'static str, got: &'static str },
}

/// A tagged message with canonically ordered fields.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProtocolMessage {
    tag: MessageTag,
    fields: Vec<(FieldId, Vec<u8>)>,
}

impl ProtocolMessage {
    pub fn new(tag: MessageTag, fields: Vec<(FieldId, Vec<u8>)>) -> Result<Self, CodecError> {
        if fields.len() > u8::MAX as usize {
            return Err(CodecError::TooManyFields);
        }
        if let Some((_, v)) = fields.iter().find(|(_, v)| v.len() > MAX_PART_LEN) {
            return Err(CodecError::FieldTooLong(v.len()));
        }
        if fields.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(CodecError::Canonicality);
        }
        Ok(Self { tag, fields })
    }

    pub fn tag(&self) -> MessageTag {
        self.tag
    }

    pub fn fields(&self) -> &[(FieldId, Vec<u8>)] {
        &self.fields
    }

    pub fn field(&self, id: FieldId) -> Option<&[u8]> {
        self.fields.iter().find(|(f, _)| *f == id).map(|(_, v)| v.as_slice())
    }

    /// Field `id`, or [`CodecError::Field`] when absent.
    pub fn require(&self, id: FieldId) -> Result<&[u8], CodecError> {
        self.field(id).ok_or(CodecError::Field(id))
    }

    pub fn expect_tag(&self, tag: MessageTag) -> Result<(), CodecError> {
        if self.tag == tag {
            Ok(())
        } else {
            Err(CodecError::UnexpectedTag { expected: tag.name(), got: self.tag.name() })
        }
    }
}

pub fn encode_message(m: &ProtocolMessage) -> Vec<u8> {
    let body: usize = m.fields.iter().map(|(_, v)| 3 + v.len()).sum();
    let mut out = Vec::with_capacity(2 + body);
    out.push(m.tag as u8);
    out.push(m.fields.len() as u8);
    for (id, value) in &m.fields {
        out.push(*id);
        out.extend_from_slice(&(value.len() as u16).to_be_bytes());
        out.extend_from_slice(value);
    }
    out
}

pub fn decode_message(b: &[u8]) -> Result<ProtocolMessage, CodecError> {
    let mut rest = b;
    let mut take = |n: usize| -> Result<&[u8], CodecError> {
        if rest.len() < n {
            return Err(CodecError::Truncation);
        }
        let (head, tail) = rest.split_at(n);
        rest = tail;
        Ok(head)
    };

    let tag_byte = take(1)?[0];
    let tag = MessageTag::from_byte(tag_byte).ok_or(CodecError::UnknownTag(tag_byte))?;
    let count = take(1)?[0] as usize;
    let mut fields: Vec<(FieldId, Vec<u8>)> = Vec::with_capacity(count);
    for _ in 0..count {
        let id = take(1)?[0];
        if fields.last().is_some_and(|(prev, _)| *prev >= id) {
            return Err(CodecError::Canonicality);
        }
        let len_bytes = take(2)?;
        let len = u16::from_be_bytes([len_bytes[0], len_bytes[1]]) as usize;
        fields.push((id, take(len)?.to_vec()));
    }
    if !rest.is_empty() {
        return Err(CodecError::TrailingBytes(rest.len()));
    }
    Ok(ProtocolMessage { tag, fields })
}
