//! Client and server state machines for the login flow.
//!
//! ```text
//! U -> S  Hello(username)
//! S -> U  GridOffer(session, grid)
//! U -> S  Credentials(session, PBTA response)
//! S       R_c fresh; store R_r = f(R_c // P)
//! S -> U  Challenge(session, signcrypt(sk_S, pk_U, R_c))
//! U       card: PIN, then unsigncrypt -> R_c; R_r = f(R_c // P)
//! U -> S  Response(session, R_r)
//! S -> U  Result(session, ok) | Reject(session, reason)
//! ```

mod client;
mod messages;
mod server;

pub use client::{ClientSession, ClientState};
pub use messages::{Message, RejectReason};
pub use server::{
    AccountRecord, BankServer, ChallengeSession, LoginServer, SealedSecret, ServerState, Timestamp,
    DEFAULT_TTL,
};

use crate::entropy::EntropyError;
use crate::pbta::PbtaError;
use crate::signcrypt::SigncryptError;
use crate::smartcard::CardError;
use crate::terms::CodecError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("operation not valid in the session's current state")]
    State,
    #[error("account already exists")]
    DuplicateAccount,
    #[error("no such session")]
    UnknownSession,
    #[error("message not accepted by the server")]
    UnexpectedMessage,
    #[error("public key is on different group parameters")]
    Param,
    #[error("stored secret failed to open")]
    Storage,
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Signcrypt(#[from] SigncryptError),
}

impl From<PbtaError> for ProtocolError {
    fn from(e: PbtaError) -> Self {
        match e {
            PbtaError::Entropy(e) => ProtocolError::Entropy(e),
            _ => ProtocolError::Storage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    #[error("operation not valid in the client's current state")]
    State,
    #[error("challenge did not come from the bank")]
    ServerAuthentication,
    #[error("card is locked")]
    CardLocked,
    #[error("server rejected the login: {}", .0.name())]
    Rejected(RejectReason),
    #[error("message belongs to another session")]
    SessionMismatch,
    #[error("unexpected message")]
    UnexpectedMessage,
    #[error(transparent)]
    Card(CardError),
}
