//! JSON bodies for the HTTP endpoints.
//!
//! Login bodies carry the TLV wire message base-64 encoded in `message`.
//! The other response fields mirror non-secret parts of that message so a
//! browser can render them without a TLV decoder; the TLV bytes stay
//! authoritative.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use smbank_core::protocol::Message;
use smbank_core::terms::MessageTag;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterRequest {
    pub username: String,
    pub phone: String,
    pub password: String,
    pub pin: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterResponse {
    pub username: String,
    pub card_id: String,
    /// The personalized card file, base-64.
    pub card: String,
    pub bank_public_key: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageRequest {
    pub message: String,
}

impl MessageRequest {
    pub fn new(msg: &Message) -> Self {
        Self { message: B64.encode(msg.encode()) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageResponse {
    pub message: String,
    pub tag: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub session: Option<String>,
    /// The 36-character grid, row-major.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grid: Option<String>,
    /// The signcrypted challenge payload in base-32, for display only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub payload_code: Option<String>,
    /// `"ok"` on a Result, otherwise the reject reason.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub status: Option<String>,
    /// Server session state after the request.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub state: Option<String>,
}

pub fn tag_name(tag: MessageTag) -> &'static str {
    match tag {
        MessageTag::Hello => "Hello",
        MessageTag::GridOffer => "GridOffer",
        MessageTag::Credentials => "Credentials",
        MessageTag::Challenge => "Challenge",
        MessageTag::Response => "Response",
        MessageTag::Result => "Result",
        MessageTag::Reject => "Reject",
    }
}

impl MessageResponse {
    pub fn describe(msg: &Message) -> Self {
        let mut out = MessageResponse {
            message: B64.encode(msg.encode()),
            tag: tag_name(msg.tag()).into(),
            session: msg.session_id().map(|s| hex::encode(s.as_bytes())),
            ..Default::default()
        };
        match msg {
            Message::GridOffer { grid, .. } => out.grid = Some(grid.as_str().into()),
            Message::Challenge { payload, .. } => {
                out.payload_code = Some(data_encoding::BASE32_NOPAD.encode(payload))
            }
            Message::Result { status, .. } => {
                out.status = Some(if *status == 0 { "ok".into() } else { format!("status_{status}") })
            }
            Message::Reject { reason, .. } => out.status = Some(reason.name().into()),
            _ => {}
        }
        out
    }

    pub fn decode_message(&self) -> Option<Message> {
        Message::decode(&B64.decode(&self.message).ok()?).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusResponse {
    pub session: String,
    pub state: String,
    pub issued_at: u64,
    pub expires_at: u64,
    pub consumed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CardCommandRequest {
    /// A framed card command, base-64.
    pub command: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CardCommandResponse {
    /// The framed card reply, base-64.
    pub reply: String,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}
