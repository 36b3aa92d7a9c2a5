//! Scripted login client over HTTP or directly against an in-process
//! [`Service`].

use std::sync::Arc;
use std::time::Duration;

use smbank_core::pbta::{derive_response, PbtaSecret};
use smbank_core::protocol::{ClientError, ClientSession, ClientState, Message};
use smbank_core::smartcard::{CardCommand, CardLink, CardReply};
use smbank_core::terms::PhoneNumber;

use crate::api::{ErrorBody, MessageRequest, MessageResponse, RegisterRequest, RegisterResponse, StatusResponse};
use crate::service::{Service, ServiceError, Step};

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server error {status} {}: {}", .body.error, .body.detail)]
    Server { status: u16, body: ErrorBody },
    #[error("server reply did not decode")]
    BadReply,
}

impl From<ServiceError> for TransportError {
    fn from(e: ServiceError) -> Self {
        TransportError::Server { status: e.status, body: ErrorBody { error: e.code.into(), detail: e.detail } }
    }
}

/// How the client reaches the bank.
pub trait Transport {
    fn register(&mut self, req: &RegisterRequest) -> Result<RegisterResponse, TransportError>;
    fn exchange(&mut self, step: Step, msg: &Message) -> Result<MessageResponse, TransportError>;
    fn status(&mut self, session_hex: &str) -> Result<StatusResponse, TransportError>;
}

pub struct HttpTransport {
    base: String,
    http: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(base: impl Into<String>) -> Result<Self, TransportError> {
        let http = reqwest::blocking::Client::builder().timeout(Duration::from_secs(30)).build()?;
        Ok(Self { base: base.into().trim_end_matches('/').to_owned(), http })
    }

    fn finish<T: serde::de::DeserializeOwned>(resp: reqwest::blocking::Response) -> Result<T, TransportError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json()?);
        }
        let body = resp.json::<ErrorBody>().unwrap_or_else(|_| ErrorBody {
            error: "http".into(),
            detail: status.canonical_reason().unwrap_or("error").into(),
        });
        Err(TransportError::Server { status: status.as_u16(), body })
    }

    fn post<B: serde::Serialize, T: serde::de::DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<T, TransportError> {
        Self::finish(self.http.post(format!("{}{path}", self.base)).json(body).send()?)
    }
}

pub fn step_path(step: Step) -> &'static str {
    match step {
        Step::Hello => "/login/hello",
        Step::Credentials => "/login/credentials",
        Step::Response => "/login/response",
    }
}

impl Transport for HttpTransport {
    fn register(&mut self, req: &RegisterRequest) -> Result<RegisterResponse, TransportError> {
        self.post("/accounts", req)
    }

    fn exchange(&mut self, step: Step, msg: &Message) -> Result<MessageResponse, TransportError> {
        self.post(step_path(step), &MessageRequest::new(msg))
    }

    fn status(&mut self, session_hex: &str) -> Result<StatusResponse, TransportError> {
        Self::finish(self.http.get(format!("{}/login/{session_hex}/status", self.base)).send()?)
    }
}

/// Calls the service directly; the JSON shim is still exercised.
pub struct InProcess(pub Arc<Service>);

impl Transport for InProcess {
    fn register(&mut self, req: &RegisterRequest) -> Result<RegisterResponse, TransportError> {
        Ok(self.0.register(req)?)
    }

    fn exchange(&mut self, step: Step, msg: &Message) -> Result<MessageResponse, TransportError> {
        let body = serde_json::to_vec(&MessageRequest::new(msg)).expect("serializable");
        Ok(self.0.login_json(step, &body)?)
    }

    fn status(&mut self, session_hex: &str) -> Result<StatusResponse, TransportError> {
        Ok(self.0.status(session_hex)?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoginError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("PIN rejected, {0} tries left")]
    PinRejected(u8),
    #[error("card is locked")]
    CardLocked,
    #[error("card: {0}")]
    Card(String),
    #[error("password: {0}")]
    Password(String),
}

/// What a scripted login saw.
#[derive(Debug, Clone)]
pub struct LoginReport {
    pub session: String,
    pub client_state: ClientState,
    /// Server session state from the status endpoint.
    pub server_state: String,
    /// `(tag, length)` for every wire message, in order.
    pub trace: Vec<(String, usize)>,
}

pub struct LoginInput<'a> {
    pub username: &'a str,
    pub phone: &'a str,
    pub password: &'a str,
    pub pin: &'a str,
}

fn reply(resp: &MessageResponse, trace: &mut Vec<(String, usize)>) -> Result<Message, LoginError> {
    let msg = resp.decode_message().ok_or(TransportError::BadReply)?;
    trace.push((resp.tag.clone(), msg.encode().len()));
    Ok(msg)
}

/// One full login. The password stands in for the human reading the grid:
/// only the derived grid response is sent.
pub fn login<T: Transport + ?Sized, L: CardLink + ?Sized>(
    transport: &mut T,
    card: &mut L,
    input: &LoginInput<'_>,
) -> Result<LoginReport, LoginError> {
    let phone = PhoneNumber::new(input.phone).map_err(|e| LoginError::Password(e.to_string()))?;
    let secret =
        PbtaSecret::new(input.password.to_ascii_uppercase()).map_err(|e| LoginError::Password(e.to_string()))?;
    let mut client = ClientSession::new(input.username.as_bytes(), phone);
    let mut trace = Vec::new();

    let hello = client.hello();
    trace.push(("Hello".into(), hello.encode().len()));
    let offer = reply(&transport.exchange(Step::Hello, &hello)?, &mut trace)?;
    let grid = *client.receive_grid_offer(&offer)?;
    let session = hex::encode(client.session_id().expect("set with the grid").as_bytes());

    let creds = client.send_credentials(derive_response(&secret, &grid))?;
    drop(secret);
    trace.push(("Credentials".into(), creds.encode().len()));
    let challenge = reply(&transport.exchange(Step::Credentials, &creds)?, &mut trace)?;
    if let Message::Challenge { .. } = challenge {
        match card.transmit(&CardCommand::VerifyPin(input.pin.as_bytes().to_vec())) {
            Ok(CardReply::PinAccepted(_)) => {}
            Ok(CardReply::PinRejected(left)) => return Err(LoginError::PinRejected(left)),
            Ok(CardReply::Locked) => return Err(LoginError::CardLocked),
            Ok(other) => return Err(LoginError::Card(format!("{other:?}"))),
            Err(e) => return Err(LoginError::Card(e.to_string())),
        }
    }
    let response = client.process_challenge(card, &challenge)?;
    trace.push(("Response".into(), response.encode().len()));
    let result = reply(&transport.exchange(Step::Response, &response)?, &mut trace)?;
    client.receive_result(&result)?;
    let server_state = transport.status(&session)?.state;
    Ok(LoginReport { session, client_state: client.state(), server_state, trace })
}
