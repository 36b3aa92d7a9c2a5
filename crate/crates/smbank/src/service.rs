//! The bank service: account provisioning, login sessions and the demo
//! card endpoint, plus the axum routes that expose them.
//!
//! [`Service`] is synchronous and transport-free. The HTTP handlers move
//! each call onto the blocking pool, since every step does modular
//! exponentiation or key derivation.

use std::collections::{BTreeMap, HashMap};
use std::future::Future;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::rngs::OsRng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use smbank_core::pbta::PbtaSecret;
use smbank_core::protocol::{BankServer, ChallengeSession, Message, ProtocolError, RejectReason, ServerState};
use smbank_core::seal::SealKey;
use smbank_core::signcrypt::{keygen, PrivateKey, PublicKey};
use smbank_core::smartcard::{personalize, status, CardError, CardState};
use smbank_core::terms::{Identity, MessageTag, PhoneNumber, SessionId, SESSION_ID_LEN};

use crate::api::{
    tag_name, CardCommandRequest, CardCommandResponse, ErrorBody, MessageRequest, MessageResponse, RegisterRequest,
    RegisterResponse, StatusResponse,
};
use crate::config::ServerConfig;
use crate::keys::{load_or_create_bank_key, named_group, CardDir};
use crate::store::AccountStore;

/// Finished or expired sessions stay queryable this long past their ttl.
const SESSION_RETENTION: u64 = 300;

pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{code}: {detail}")]
pub struct ServiceError {
    pub status: u16,
    pub code: &'static str,
    pub detail: String,
}

impl ServiceError {
    fn new(status: u16, code: &'static str, detail: impl ToString) -> Self {
        Self { status, code, detail: detail.to_string() }
    }
    fn bad(code: &'static str, detail: impl ToString) -> Self {
        Self::new(400, code, detail)
    }
    fn internal(detail: impl ToString) -> Self {
        Self::new(500, "internal", detail)
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(ErrorBody { error: self.code.into(), detail: self.detail })).into_response()
    }
}

/// Which login endpoint a message arrived on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Hello,
    Credentials,
    Response,
}

impl Step {
    fn tag(self) -> MessageTag {
        match self {
            Step::Hello => MessageTag::Hello,
            Step::Credentials => MessageTag::Credentials,
            Step::Response => MessageTag::Response,
        }
    }
}

pub struct Service {
    bank: RwLock<BankServer>,
    store: Mutex<AccountStore>,
    sessions: Mutex<BTreeMap<SessionId, Arc<Mutex<ChallengeSession>>>>,
    cards: CardDir,
    live_cards: Mutex<HashMap<String, Arc<Mutex<CardState>>>>,
    demo_card_endpoint: bool,
    clock: Clock,
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::bad("malformed_body", e))
}

fn valid_username(name: &str) -> bool {
    (1..=64).contains(&name.len()) && name.bytes().all(|b| b.is_ascii_alphanumeric() || b"._-@".contains(&b))
}

impl Service {
    pub fn open(cfg: &ServerConfig, master: SealKey) -> anyhow::Result<Self> {
        Self::open_with_clock(cfg, master, system_clock())
    }

    pub fn open_with_clock(cfg: &ServerConfig, master: SealKey, clock: Clock) -> anyhow::Result<Self> {
        let params = named_group(cfg.group);
        let bank_sk = load_or_create_bank_key(&cfg.bank_key, &params, &master, &mut OsRng)?;
        let mut bank = BankServer::new(bank_sk, master, cfg.ttl, &mut OsRng)?;
        let (store, report) = AccountStore::open(&cfg.store, &params)?;
        let loaded = report.records.len();
        for record in report.records {
            bank.insert_record(record)?;
        }
        tracing::info!(accounts = loaded, group = cfg.group.name(), ttl = cfg.ttl, "service ready");
        Ok(Service {
            bank: RwLock::new(bank),
            store: Mutex::new(store),
            sessions: Mutex::new(BTreeMap::new()),
            cards: CardDir::new(&cfg.cards_dir),
            live_cards: Mutex::new(HashMap::new()),
            demo_card_endpoint: cfg.demo_card_endpoint,
            clock,
        })
    }

    fn now(&self) -> u64 {
        (self.clock)()
    }

    pub fn bank_pk(&self) -> PublicKey {
        self.bank.read().expect("bank lock").bank_pk().clone()
    }

    pub fn account_count(&self) -> usize {
        self.bank.read().expect("bank lock").accounts().count()
    }

    /// Creates the account and personalizes its card. The password and PIN
    /// are used here and never stored in the clear.
    pub fn register(&self, req: &RegisterRequest) -> Result<RegisterResponse, ServiceError> {
        let identity = self.check_request(req)?;
        let params = self.bank.read().expect("bank lock").params().clone();
        let (user_sk, _) = keygen(&params, identity, &mut OsRng).map_err(ServiceError::internal)?;
        self.register_with_key(req, &user_sk)
    }

    fn check_request(&self, req: &RegisterRequest) -> Result<Identity, ServiceError> {
        if !valid_username(&req.username) {
            return Err(ServiceError::bad("invalid_username", "1-64 characters from A-Z a-z 0-9 . _ - @"));
        }
        Identity::user(req.username.as_bytes()).map_err(|e| ServiceError::bad("invalid_username", e))
    }

    /// [`Service::register`] with a caller-supplied user key pair.
    pub fn register_with_key(&self, req: &RegisterRequest, user_sk: &PrivateKey) -> Result<RegisterResponse, ServiceError> {
        let identity = self.check_request(req)?;
        if user_sk.owner() != &identity {
            return Err(ServiceError::bad("invalid_username", "key belongs to another user"));
        }
        let phone = PhoneNumber::new(&req.phone).map_err(|e| ServiceError::bad("invalid_phone", e))?;
        let secret = PbtaSecret::new(req.password.to_ascii_uppercase())
            .map_err(|e| ServiceError::bad("invalid_password", e))?;

        let mut bank = self.bank.write().expect("bank lock");
        if bank.account(identity.name()).is_some() {
            return Err(ServiceError::new(409, "duplicate_account", "username is taken"));
        }
        if user_sk.params() != bank.params() {
            return Err(ServiceError::bad("invalid_key", "key is on another group"));
        }
        let card = personalize(user_sk, bank.bank_pk(), req.pin.as_bytes(), &mut OsRng).map_err(|e| match e {
            CardError::PinFormat => ServiceError::bad("invalid_pin", "PIN must be 4-8 digits"),
            other => ServiceError::internal(other),
        })?;
        let record = bank
            .register(identity, &secret, phone, user_sk.public_key(), self.now(), &mut OsRng)
            .map_err(ServiceError::internal)?
            .clone();
        self.store.lock().expect("store lock").append(&record).map_err(|e| {
            tracing::error!(error = %e, "account store append failed");
            ServiceError::internal("account store write failed")
        })?;
        let card_bytes = card.to_bytes().map_err(ServiceError::internal)?;
        let card_id = self.cards.save(&card).map_err(ServiceError::internal)?;
        let bank_public_key = hex::encode(bank.bank_pk().to_bytes());
        drop(bank);
        tracing::info!(user = %req.username, card = %card_id, "account registered");
        Ok(RegisterResponse {
            username: req.username.clone(),
            card_id,
            card: B64.encode(card_bytes),
            bank_public_key,
        })
    }

    pub fn register_json(&self, body: &[u8]) -> Result<RegisterResponse, ServiceError> {
        self.register(&parse_body(body)?)
    }

    fn session(&self, id: &SessionId) -> Result<Arc<Mutex<ChallengeSession>>, ServiceError> {
        self.sessions
            .lock()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::new(404, "unknown_session", "no such session"))
    }

    fn purge_sessions(&self, now: u64) {
        self.sessions.lock().expect("session table lock").retain(|_, s| {
            let s = s.lock().expect("session lock");
            now <= s.issued_at().saturating_add(s.ttl()).saturating_add(SESSION_RETENTION)
        });
    }

    /// Runs one typed message through the session it names.
    pub fn handle(&self, step: Step, msg: &Message) -> Result<Message, ServiceError> {
        if msg.tag() != step.tag() {
            return Err(ServiceError::bad("wrong_message", format!("expected {}", tag_name(step.tag()))));
        }
        let now = self.now();
        let bank = self.bank.read().expect("bank lock");
        let reply = match msg {
            Message::Hello { username } => {
                self.purge_sessions(now);
                let (session, offer) = bank.handle_hello(username, now, &mut OsRng).map_err(ServiceError::internal)?;
                let id = session.session_id();
                self.sessions.lock().expect("session table lock").insert(id, Arc::new(Mutex::new(session)));
                Ok(offer)
            }
            Message::Credentials { session_id, response } => {
                let session = self.session(session_id)?;
                let mut session = session.lock().expect("session lock");
                bank.verify_credentials(&mut session, response, now, &mut OsRng)
            }
            Message::Response { session_id, rr } => {
                let session = self.session(session_id)?;
                let mut session = session.lock().expect("session lock");
                bank.verify_response(&mut session, rr, now)
            }
            _ => unreachable!("tag checked against the step"),
        };
        let reply = match reply {
            Ok(m) => m,
            Err(ProtocolError::State) => Message::Reject {
                session_id: msg.session_id().expect("routed messages carry a session"),
                reason: RejectReason::State,
            },
            Err(e) => return Err(ServiceError::internal(e)),
        };
        let outcome = match &reply {
            Message::Reject { reason, .. } => reason.name(),
            other => tag_name(other.tag()),
        };
        let session = reply.session_id().map(|s| hex::encode(&s.as_bytes()[..4])).unwrap_or_default();
        tracing::info!(step = ?step, session = %session, outcome, "login step");
        Ok(reply)
    }

    /// The JSON shim over [`Service::handle`].
    pub fn login_json(&self, step: Step, body: &[u8]) -> Result<MessageResponse, ServiceError> {
        let req: MessageRequest = parse_body(body)?;
        let bytes = B64.decode(req.message.trim()).map_err(|e| ServiceError::bad("bad_base64", e))?;
        let msg = Message::decode(&bytes).map_err(|e| ServiceError::bad("bad_message", e))?;
        let reply = self.handle(step, &msg)?;
        let mut out = MessageResponse::describe(&reply);
        if let Some(id) = reply.session_id() {
            out.state = self.status_of(&id).map(|s| s.state);
        }
        Ok(out)
    }

    fn status_of(&self, id: &SessionId) -> Option<StatusResponse> {
        let session = self.session(id).ok()?;
        let s = session.lock().expect("session lock");
        Some(StatusResponse {
            session: hex::encode(id.as_bytes()),
            state: s.state().name().into(),
            issued_at: s.issued_at(),
            expires_at: s.issued_at() + s.ttl(),
            consumed: s.consumed(),
        })
    }

    pub fn status(&self, session_hex: &str) -> Result<StatusResponse, ServiceError> {
        let mut raw = [0u8; SESSION_ID_LEN];
        hex::decode_to_slice(session_hex, &mut raw).map_err(|_| ServiceError::bad("bad_session_id", "32 hex digits"))?;
        let id = SessionId::from_slice(&raw).map_err(|e| ServiceError::bad("bad_session_id", e))?;
        self.status_of(&id).ok_or_else(|| ServiceError::new(404, "unknown_session", "no such session"))
    }

    pub fn session_state(&self, id: &SessionId) -> Option<ServerState> {
        let session = self.session(id).ok()?;
        let state = session.lock().expect("session lock").state();
        Some(state)
    }

    /// Demo-only: drives a server-held card with framed commands. The reply
    /// to a tap carries the recovered nonce, exactly as a card would hand
    /// it to the phone.
    pub fn card_command(&self, card_id: &str, body: &[u8]) -> Result<CardCommandResponse, ServiceError> {
        if !self.demo_card_endpoint {
            return Err(ServiceError::new(404, "card_endpoint_disabled", "demo card endpoint is off"));
        }
        let req: CardCommandRequest = parse_body(body)?;
        let frame = B64.decode(req.command.trim()).map_err(|e| ServiceError::bad("bad_base64", e))?;
        let card = {
            let mut live = self.live_cards.lock().expect("card table lock");
            match live.get(card_id) {
                Some(c) => c.clone(),
                None => {
                    let c = self
                        .cards
                        .load(card_id)
                        .map_err(|_| ServiceError::new(404, "unknown_card", "no such card"))?;
                    live.entry(card_id.to_owned()).or_insert_with(|| Arc::new(Mutex::new(c))).clone()
                }
            }
        };
        let mut card = card.lock().expect("card lock");
        let reply = card.handle_frame(&frame);
        self.cards.save(&card).map_err(ServiceError::internal)?;
        let code = reply.first().copied().unwrap_or(status::MALFORMED);
        tracing::info!(card = %card_id, status = status_name(code), "card command");
        Ok(CardCommandResponse { reply: B64.encode(&reply), status: status_name(code).into() })
    }
}

pub fn status_name(code: u8) -> &'static str {
    match code {
        status::OK => "ok",
        status::PIN_ACCEPTED => "pin_accepted",
        status::CHALLENGE => "challenge",
        status::STATUS_INFO => "status",
        status::PIN_REJECTED => "pin_rejected",
        status::AUTH_FAIL => "auth_fail",
        status::LOCKED => "locked",
        status::PIN_REQUIRED => "pin_required",
        status::PIN_FORMAT => "pin_format",
        status::STORAGE => "storage",
        _ => "malformed",
    }
}

async fn blocking<T, F>(f: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(Ok(v)) => (StatusCode::OK, Json(v)).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(_) => ServiceError::internal("handler panicked").into_response(),
    }
}

async fn accounts(State(svc): State<Arc<Service>>, body: Bytes) -> Response {
    blocking(move || svc.register_json(&body)).await
}

async fn login(svc: Arc<Service>, step: Step, body: Bytes) -> Response {
    blocking(move || svc.login_json(step, &body)).await
}

async fn hello(State(svc): State<Arc<Service>>, body: Bytes) -> Response {
    login(svc, Step::Hello, body).await
}

async fn credentials(State(svc): State<Arc<Service>>, body: Bytes) -> Response {
    login(svc, Step::Credentials, body).await
}

async fn response(State(svc): State<Arc<Service>>, body: Bytes) -> Response {
    login(svc, Step::Response, body).await
}

async fn session_status(State(svc): State<Arc<Service>>, Path(session): Path<String>) -> Response {
    blocking(move || svc.status(&session)).await
}

async fn card_command(State(svc): State<Arc<Service>>, Path(id): Path<String>, body: Bytes) -> Response {
    blocking(move || svc.card_command(&id, &body)).await
}

pub fn router(svc: Arc<Service>) -> Router {
    Router::new()
        .route("/accounts", post(accounts))
        .route("/login/hello", post(hello))
        .route("/login/credentials", post(credentials))
        .route("/login/response", post(response))
        .route("/login/:session/status", get(session_status))
        .route("/card/:id/command", post(card_command))
        .with_state(svc)
}

pub async fn serve(
    svc: Arc<Service>,
    listener: tokio::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(svc)).with_graceful_shutdown(shutdown).await
}

/// A server on its own runtime thread, stopped on drop.
pub struct BackgroundServer {
    pub addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl BackgroundServer {
    pub fn start(svc: Arc<Service>, addr: SocketAddr) -> std::io::Result<Self> {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
        let listener = rt.block_on(tokio::net::TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            rt.block_on(serve(svc, listener, async move {
                let _ = rx.await;
            }))
        });
        Ok(Self { addr, stop: Some(tx), thread: Some(thread) })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> std::io::Result<()> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}
