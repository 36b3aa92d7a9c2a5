use alloc::vec::Vec;

use super::messages::{Message, RejectReason};
use super::ClientError;
use crate::pbta::{PbtaGrid, PbtaResponse};
use crate::smartcard::{CardCommand, CardError, CardLink, CardReply};
use crate::terms::{derive_response_nonce, PhoneNumber, SessionId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClientState {
    Started,
    GridReceived,
    CredentialsSent,
    ChallengeReceived,
    CardTapped,
    ResponseSent,
    Done,
    Aborted,
}

/// The mobile app's side of one login.
#[derive(Debug, Clone)]
pub struct ClientSession {
    username: Vec<u8>,
    phone: PhoneNumber,
    session_id: Option<SessionId>,
    grid: Option<PbtaGrid>,
    state: ClientState,
}

impl ClientSession {
    pub fn new(username: impl Into<Vec<u8>>, phone: PhoneNumber) -> Self {
        Self { username: username.into(), phone, session_id: None, grid: None, state: ClientState::Started }
    }

    pub fn state(&self) -> ClientState {
        self.state
    }

    pub fn session_id(&self) -> Option<SessionId> {
        self.session_id
    }

    pub fn grid(&self) -> Option<&PbtaGrid> {
        self.grid.as_ref()
    }

    fn expect_state(&mut self, s: ClientState) -> Result<(), ClientError> {
        if self.state == s {
            Ok(())
        } else {
            Err(ClientError::State)
        }
    }

    fn abort(&mut self, e: ClientError) -> ClientError {
        self.state = ClientState::Aborted;
        e
    }

    /// A `Reject`, or a message for another session, ends the login.
    fn screen(&mut self, msg: &Message) -> Result<(), ClientError> {
        if let (Some(mine), Some(theirs)) = (self.session_id, msg.session_id()) {
            if mine != theirs {
                return Err(self.abort(ClientError::SessionMismatch));
            }
        }
        if let Message::Reject { reason, .. } = msg {
            return Err(self.abort(ClientError::Rejected(*reason)));
        }
        Ok(())
    }

    pub fn hello(&self) -> Message {
        Message::Hello { username: self.username.clone() }
    }

    pub fn receive_grid_offer(&mut self, msg: &Message) -> Result<&PbtaGrid, ClientError> {
        self.expect_state(ClientState::Started)?;
        self.screen(msg)?;
        let Message::GridOffer { session_id, grid } = msg else {
            return Err(self.abort(ClientError::UnexpectedMessage));
        };
        self.session_id = Some(*session_id);
        self.state = ClientState::GridReceived;
        Ok(self.grid.insert(*grid))
    }

    /// The characters the human read off the grid.
    pub fn send_credentials(&mut self, response: PbtaResponse) -> Result<Message, ClientError> {
        self.expect_state(ClientState::GridReceived)?;
        self.state = ClientState::CredentialsSent;
        Ok(Message::Credentials { session_id: self.session_id.expect("set with the grid"), response })
    }

    /// The human has already entered the PIN on the card; the
    /// payload goes to the card, and `R_r = f(R_c // P)` comes back out.
    pub fn process_challenge<L: CardLink + ?Sized>(
        &mut self,
        card: &mut L,
        msg: &Message,
    ) -> Result<Message, ClientError> {
        self.expect_state(ClientState::CredentialsSent)?;
        self.screen(msg)?;
        let Message::Challenge { session_id, payload } = msg else {
            return Err(self.abort(ClientError::UnexpectedMessage));
        };
        self.state = ClientState::ChallengeReceived;
        let rc = match card.transmit(&CardCommand::TapUnsigncrypt(payload.clone())) {
            Ok(CardReply::Challenge(rc)) => rc,
            Ok(CardReply::AuthFail) => return Err(self.abort(ClientError::ServerAuthentication)),
            Ok(CardReply::Locked) => return Err(self.abort(ClientError::CardLocked)),
            Ok(_) => return Err(self.abort(ClientError::Card(CardError::Decode))),
            Err(e) => return Err(self.abort(ClientError::Card(e))),
        };
        self.state = ClientState::CardTapped;
        let rr = derive_response_nonce(&rc, &self.phone);
        // `rc` is dropped here; only `R_r` leaves this function.
        self.state = ClientState::ResponseSent;
        Ok(Message::Response { session_id: *session_id, rr })
    }

    pub fn receive_result(&mut self, msg: &Message) -> Result<(), ClientError> {
        self.expect_state(ClientState::ResponseSent)?;
        self.screen(msg)?;
        match msg {
            Message::Result { status: 0, .. } => {
                self.state = ClientState::Done;
                Ok(())
            }
            Message::Result { .. } => Err(self.abort(ClientError::Rejected(RejectReason::Response))),
            _ => Err(self.abort(ClientError::UnexpectedMessage)),
        }
    }
}
