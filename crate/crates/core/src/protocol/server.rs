use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand_core::RngCore;
use subtle::ConstantTimeEq;

use super::messages::{Message, RejectReason};
use super::ProtocolError;
use crate::entropy;
use crate::pbta::{self, PbtaGrid, PbtaSecret};
use crate::seal::{self, SealKey};
use crate::signcrypt::{keygen, signcrypt, GroupParams, PrivateKey, PublicKey};
use crate::terms::{derive_response_nonce, generate_nonce, Digest, Identity, PhoneNumber, SessionId};

/// Seconds since an arbitrary epoch, supplied by the caller.
pub type Timestamp = u64;

/// Default challenge lifetime in seconds.
pub const DEFAULT_TTL: u64 = 60;

const PBTA_SEAL_LABEL: &[u8] = b"account/pbta";

/// PBTA secret sealed under a per-record key derived from the master key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedSecret {
    pub salt: [u8; 16],
    pub blob: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccountRecord {
    pub username: Identity,
    pub sealed_pbta_secret: SealedSecret,
    pub phone: PhoneNumber,
    pub user_pk: PublicKey,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ServerState {
    GridIssued,
    CredentialsVerified,
    ChallengeIssued,
    Authenticated,
    Failed,
}

impl ServerState {
    pub fn is_terminal(self) -> bool {
        matches!(self, ServerState::Authenticated | ServerState::Failed)
    }

    pub fn name(self) -> &'static str {
        match self {
            ServerState::GridIssued => "grid_issued",
            ServerState::CredentialsVerified => "credentials_verified",
            ServerState::ChallengeIssued => "challenge_issued",
            ServerState::Authenticated => "authenticated",
            ServerState::Failed => "failed",
        }
    }
}

/// Server-side state of one login attempt.
#[derive(Debug, Clone)]
pub struct ChallengeSession {
    session_id: SessionId,
    username: Vec<u8>,
    grid: PbtaGrid,
    state: ServerState,
    expected_rr: Option<Digest>,
    issued_at: Timestamp,
    ttl: u64,
    consumed: bool,
    challenges_issued: u32,
}

impl ChallengeSession {
    pub fn session_id(&self) -> SessionId {
        self.session_id
    }
    pub fn username(&self) -> &[u8] {
        &self.username
    }
    pub fn grid(&self) -> &PbtaGrid {
        &self.grid
    }
    pub fn state(&self) -> ServerState {
        self.state
    }
    pub fn expected_rr(&self) -> Option<&Digest> {
        self.expected_rr.as_ref()
    }
    pub fn issued_at(&self) -> Timestamp {
        self.issued_at
    }
    pub fn ttl(&self) -> u64 {
        self.ttl
    }
    pub fn consumed(&self) -> bool {
        self.consumed
    }
    pub fn challenges_issued(&self) -> u32 {
        self.challenges_issued
    }

    fn expired(&self, now: Timestamp) -> bool {
        now.saturating_sub(self.issued_at) > self.ttl
    }

    fn advance(&mut self, to: ServerState) {
        debug_assert!(to >= self.state || to == ServerState::Failed, "state moved backward");
        debug_assert!(!self.state.is_terminal(), "terminal state left");
        self.state = to;
    }

    fn fail(&mut self) {
        self.state = ServerState::Failed;
        self.consumed = true;
    }

    fn reject(&self, reason: RejectReason) -> Message {
        Message::Reject { session_id: self.session_id, reason }
    }
}

/// The bank: keys, account records, and the per-session operations.
///
/// Session operations take `&self` plus the session they act on, so
/// independent sessions can be driven concurrently by the caller.
pub struct BankServer {
    params: Arc<GroupParams>,
    bank_sk: PrivateKey,
    bank_pk: PublicKey,
    master: SealKey,
    ttl: u64,
    accounts: BTreeMap<Vec<u8>, AccountRecord>,
    // Stands in for unknown usernames so that path costs the same.
    decoy: AccountRecord,
}

impl BankServer {
    pub fn new<R: RngCore + ?Sized>(
        bank_sk: PrivateKey,
        master: SealKey,
        ttl: u64,
        rng: &mut R,
    ) -> Result<Self, ProtocolError> {
        let params = bank_sk.params().clone();
        let bank_pk = bank_sk.public_key();
        let mut pw = [0u8; 12];
        for c in pw.iter_mut() {
            *c = pbta::ALPHABET[entropy::UniformSource::uniform_inclusive(rng, 35)?];
        }
        let decoy_secret = PbtaSecret::new(pw).expect("decoy is over the alphabet");
        let (_, decoy_pk) = keygen(&params, Identity::user("decoy").expect("valid"), rng)?;
        let decoy = AccountRecord {
            username: Identity::user("decoy").expect("valid"),
            sealed_pbta_secret: seal_secret(&master, &decoy_secret, rng)?,
            phone: PhoneNumber::new("000000").expect("valid"),
            user_pk: decoy_pk,
            created_at: 0,
        };
        Ok(Self { params, bank_sk, bank_pk, master, ttl: ttl.max(1), accounts: BTreeMap::new(), decoy })
    }

    pub fn params(&self) -> &Arc<GroupParams> {
        &self.params
    }

    pub fn bank_pk(&self) -> &PublicKey {
        &self.bank_pk
    }

    pub fn ttl(&self) -> u64 {
        self.ttl
    }

    pub fn account(&self, username: &[u8]) -> Option<&AccountRecord> {
        self.accounts.get(username)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &AccountRecord> {
        self.accounts.values()
    }

    /// Seals the secret and stores a new account.
    pub fn register<R: RngCore + ?Sized>(
        &mut self,
        username: Identity,
        secret: &PbtaSecret,
        phone: PhoneNumber,
        user_pk: PublicKey,
        now: Timestamp,
        rng: &mut R,
    ) -> Result<&AccountRecord, ProtocolError> {
        if self.accounts.contains_key(username.name()) {
            return Err(ProtocolError::DuplicateAccount);
        }
        let record = AccountRecord {
            sealed_pbta_secret: seal_secret(&self.master, secret, rng)?,
            username,
            phone,
            user_pk,
            created_at: now,
        };
        let key = record.username.name().to_vec();
        self.insert_record(record)?;
        Ok(&self.accounts[&key])
    }

    /// Adds an already-sealed record, e.g. when loading a store.
    pub fn insert_record(&mut self, record: AccountRecord) -> Result<(), ProtocolError> {
        if record.user_pk.params() != &self.params {
            return Err(ProtocolError::Param);
        }
        let key = record.username.name().to_vec();
        if self.accounts.contains_key(&key) {
            return Err(ProtocolError::DuplicateAccount);
        }
        self.accounts.insert(key, record);
        Ok(())
    }

    /// Every username, known or not, gets a fresh grid.
    pub fn handle_hello<R: RngCore + ?Sized>(
        &self,
        username: &[u8],
        now: Timestamp,
        rng: &mut R,
    ) -> Result<(ChallengeSession, Message), ProtocolError> {
        let session_id = SessionId::generate(rng)?;
        let grid = pbta::generate_grid(rng)?;
        let session = ChallengeSession {
            session_id,
            username: username.to_vec(),
            grid,
            state: ServerState::GridIssued,
            expected_rr: None,
            issued_at: now,
            ttl: self.ttl,
            consumed: false,
            challenges_issued: 0,
        };
        Ok((session, Message::GridOffer { session_id, grid }))
    }

    /// Checks the PBTA response; on success draws `R_c`, stores
    /// `R_r = f(R_c // P)`, and sends `R_c` signcrypted to the user.
    pub fn verify_credentials<R: RngCore + ?Sized>(
        &self,
        session: &mut ChallengeSession,
        response: &pbta::PbtaResponse,
        now: Timestamp,
        rng: &mut R,
    ) -> Result<Message, ProtocolError> {
        if session.state != ServerState::GridIssued {
            return Err(ProtocolError::State);
        }
        if session.expired(now) {
            session.fail();
            return Ok(session.reject(RejectReason::Expired));
        }
        let known = self.accounts.get(session.username.as_slice());
        let account = known.unwrap_or(&self.decoy);
        let secret = open_secret(&self.master, &account.sealed_pbta_secret)?;
        let matches = pbta::verify_response(&secret, &session.grid, response) & known.is_some();

        // Both branches draw a nonce and signcrypt once.
        let rc = generate_nonce(rng)?;
        let payload = signcrypt(&self.bank_sk, &account.user_pk, rc.as_bytes(), rng)?;
        if !matches {
            session.fail();
            return Ok(session.reject(RejectReason::Credentials));
        }
        session.advance(ServerState::CredentialsVerified);
        session.expected_rr = Some(derive_response_nonce(&rc, &account.phone));
        session.issued_at = now;
        session.challenges_issued += 1;
        session.advance(ServerState::ChallengeIssued);
        Ok(Message::Challenge { session_id: session.session_id, payload: payload.to_bytes() })
    }

    /// Single-use, time-limited comparison against the stored `R_r`.
    pub fn verify_response(
        &self,
        session: &mut ChallengeSession,
        rr: &Digest,
        now: Timestamp,
    ) -> Result<Message, ProtocolError> {
        if session.consumed {
            return Ok(session.reject(RejectReason::Replay));
        }
        if session.state != ServerState::ChallengeIssued {
            return Err(ProtocolError::State);
        }
        let expected = session.expected_rr.ok_or(ProtocolError::State)?;
        if session.expired(now) {
            session.fail();
            return Ok(session.reject(RejectReason::Expired));
        }
        session.consumed = true;
        if bool::from(expected.as_bytes().ct_eq(rr.as_bytes())) {
            session.advance(ServerState::Authenticated);
            Ok(Message::Result { session_id: session.session_id, status: 0 })
        } else {
            session.advance(ServerState::Failed);
            Ok(session.reject(RejectReason::Response))
        }
    }
}

fn seal_secret<R: RngCore + ?Sized>(
    master: &SealKey,
    secret: &PbtaSecret,
    rng: &mut R,
) -> Result<SealedSecret, ProtocolError> {
    let mut salt = [0u8; 16];
    entropy::fill(rng, &mut salt)?;
    let blob = seal::seal(&master.derive(PBTA_SEAL_LABEL, &salt), rng, secret.as_bytes())?;
    Ok(SealedSecret { salt, blob })
}

fn open_secret(master: &SealKey, sealed: &SealedSecret) -> Result<PbtaSecret, ProtocolError> {
    let mut plain = seal::open(&master.derive(PBTA_SEAL_LABEL, &sealed.salt), &sealed.blob)
        .map_err(|_| ProtocolError::Storage)?;
    let secret = PbtaSecret::new(&plain).map_err(|_| ProtocolError::Storage);
    zeroize::Zeroize::zeroize(&mut plain);
    secret
}

/// A [`BankServer`] plus an in-memory session table, driven by wire bytes.
pub struct LoginServer {
    pub bank: BankServer,
    sessions: BTreeMap<SessionId, ChallengeSession>,
}

impl LoginServer {
    pub fn new(bank: BankServer) -> Self {
        Self { bank, sessions: BTreeMap::new() }
    }

    pub fn session(&self, id: &SessionId) -> Option<&ChallengeSession> {
        self.sessions.get(id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &ChallengeSession> {
        self.sessions.values()
    }

    /// Processes one typed message. Protocol-level failures come back as
    /// `Reject` messages; only undecodable or unroutable input is an error.
    pub fn handle<R: RngCore + ?Sized>(
        &mut self,
        msg: &Message,
        now: Timestamp,
        rng: &mut R,
    ) -> Result<Message, ProtocolError> {
        let result = match msg {
            Message::Hello { username } => {
                let (session, offer) = self.bank.handle_hello(username, now, rng)?;
                self.sessions.insert(session.session_id, session);
                return Ok(offer);
            }
            Message::Credentials { session_id, response } => {
                let session = self.sessions.get_mut(session_id).ok_or(ProtocolError::UnknownSession)?;
                self.bank.verify_credentials(session, response, now, rng)
            }
            Message::Response { session_id, rr } => {
                let session = self.sessions.get_mut(session_id).ok_or(ProtocolError::UnknownSession)?;
                self.bank.verify_response(session, rr, now)
            }
            _ => return Err(ProtocolError::UnexpectedMessage),
        };
        match result {
            Err(ProtocolError::State) => Ok(Message::Reject {
                session_id: msg.session_id().expect("routed messages carry a session"),
                reason: RejectReason::State,
            }),
            other => other,
        }
    }

    pub fn handle_bytes<R: RngCore + ?Sized>(
        &mut self,
        bytes: &[u8],
        now: Timestamp,
        rng: &mut R,
    ) -> Result<Vec<u8>, ProtocolError> {
        let msg = Message::decode(bytes)?;
        Ok(self.handle(&msg, now, rng)?.encode())
    }
}
