//! Concrete attacks: a whole login run over a [`SimChannel`] with one
//! interceptor strategy, reported as an [`AttackOutcome`].

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use super::channel::{Action, Delivery, Direction, EntryKind, Interceptor, SimChannel, TranscriptEntry};
use crate::entropy::UniformSource;
use crate::pbta::{self, derive_response, PbtaResponse, PbtaSecret};
use crate::protocol::{
    BankServer, ClientError, ClientSession, ClientState, LoginServer, Message, ProtocolError, RejectReason,
    ServerState,
};
use crate::seal::SealKey;
use crate::signcrypt::{keygen, signcrypt, unsigncrypt, GroupParams, PrivateKey, PublicKey, SigncryptedPayload};
use crate::smartcard::{personalize, CardCommand, CardError, CardLink, CardReply, CardState};
use crate::terms::{Identity, MessageTag, Nonce, PhoneNumber, SessionId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scenario {
    PassiveEavesdrop,
    ReplayResponse,
    TamperChallenge,
    SpoofServer,
    StalePbtaReplay,
    StolenCardNoPin,
    /// Control run against a variant that sends `R_c` in the clear, as an
    /// SMS one-time code would. It must leak.
    SmsOtpCanary,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::PassiveEavesdrop,
        Scenario::ReplayResponse,
        Scenario::TamperChallenge,
        Scenario::SpoofServer,
        Scenario::StalePbtaReplay,
        Scenario::StolenCardNoPin,
        Scenario::SmsOtpCanary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::PassiveEavesdrop => "passive_eavesdrop",
            Scenario::ReplayResponse => "replay_response",
            Scenario::TamperChallenge => "tamper_challenge",
            Scenario::SpoofServer => "spoof_server",
            Scenario::StalePbtaReplay => "stale_pbta_replay",
            Scenario::StolenCardNoPin => "stolen_card_no_pin",
            Scenario::SmsOtpCanary => "sms_otp_canary",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, UnknownScenario> {
        Self::ALL.into_iter().find(|s| s.name() == name).ok_or_else(|| UnknownScenario(name.into()))
    }

    /// Whether an outcome is the one this scenario promises. The canary
    /// passes when it leaks.
    pub fn check(self, o: &AttackOutcome) -> Result<(), String> {
        let fail = |what: &str| Err(format!("{}: {what}", self.name()));
        if self != Scenario::SmsOtpCanary && !o.attacker_learned.is_empty() {
            return fail("attacker learned a secret");
        }
        match self {
            Scenario::PassiveEavesdrop => {
                if o.server_final_state != Some(ServerState::Authenticated) || o.client_final_state != ClientState::Done {
                    return fail("honest login did not complete");
                }
            }
            Scenario::ReplayResponse => {
                let replay_rejected = matches!(
                    o.replies_to_attacker.as_slice(),
                    [Message::Reject { reason: RejectReason::Replay, .. }]
                );
                if !replay_rejected || o.authenticated_sessions != 1 {
                    return fail("replayed response was not rejected as a replay");
                }
            }
            Scenario::TamperChallenge | Scenario::SpoofServer => {
                if o.client_error != Some(ClientError::ServerAuthentication) {
                    return fail("client did not detect the forged challenge");
                }
                if o.responses_sent() != 0 || o.authenticated_sessions != 0 {
                    return fail("a response went out for a forged challenge");
                }
            }
            Scenario::StalePbtaReplay => {
                let rejected =
                    matches!(o.replies_to_attacker.last(), Some(Message::Reject { reason: RejectReason::Credentials, .. }));
                if !rejected || o.server_final_state != Some(ServerState::Failed) {
                    return fail("stale PBTA response was accepted");
                }
            }
            Scenario::StolenCardNoPin => {
                if !o.card_locked || o.authenticated_sessions != 0 {
                    return fail("card did not lock against PIN guessing");
                }
            }
            Scenario::SmsOtpCanary => {
                if !o.attacker_learned.contains(&SecretLabel::ChallengeNonce) {
                    return fail("canary did not leak the challenge nonce");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown scenario `{0}`")]
pub struct UnknownScenario(pub String);

/// Factor-removal runs: the login is attempted with one factor missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ablation {
    WrongPassword,
    /// No card: the operator can only guess `R_c`.
    NoCard,
    ThreeWrongPins,
    /// A card holding some other key pair than the registered one.
    WrongUserKey,
}

impl Ablation {
    pub const ALL: [Ablation; 4] =
        [Ablation::WrongPassword, Ablation::NoCard, Ablation::ThreeWrongPins, Ablation::WrongUserKey];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::WrongPassword => "wrong_password",
            Ablation::NoCard => "no_card",
            Ablation::ThreeWrongPins => "three_wrong_pins",
            Ablation::WrongUserKey => "wrong_user_key",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SecretLabel {
    ChallengeNonce,
    ResponseNoncePreUse,
    Password,
    Pin,
    UserPrivateKey,
    BankPrivateKey,
}

impl SecretLabel {
    pub fn name(self) -> &'static str {
        match self {
            SecretLabel::ChallengeNonce => "R_c",
            SecretLabel::ResponseNoncePreUse => "R_r (pre-use)",
            SecretLabel::Password => "password",
            SecretLabel::Pin => "PIN",
            SecretLabel::UserPrivateKey => "user private key",
            SecretLabel::BankPrivateKey => "bank private key",
        }
    }
}

/// The actual secret values of one run, for byte-matching.
#[derive(Clone, Default)]
pub struct RunSecrets {
    pub challenge_nonces: Vec<Vec<u8>>,
    pub response_nonces: Vec<Vec<u8>>,
    pub password: Vec<u8>,
    pub pin: Vec<u8>,
    pub user_sk: Vec<u8>,
    pub bank_sk: Vec<u8>,
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Toy-group scalars are a single byte and turn up in any transcript by
/// chance, so keys shorter than this are not matched.
const MIN_KEY_SCAN_LEN: usize = 4;

fn contains_key(haystack: &[u8], key: &[u8]) -> bool {
    key.len() >= MIN_KEY_SCAN_LEN && contains(haystack, key)
}

/// Which secrets appear anywhere in the transcript bytes. `R_r` only counts
/// when it shows up before the client first sends it.
pub fn learned_from_transcript(transcript: &[TranscriptEntry], secrets: &RunSecrets) -> BTreeSet<SecretLabel> {
    let first_response = transcript
        .iter()
        .position(|e| e.kind == EntryKind::Sent && e.direction == Direction::ToServer && e.tag() == Some(MessageTag::Response))
        .unwrap_or(transcript.len());
    let mut learned = BTreeSet::new();
    for (i, entry) in transcript.iter().enumerate() {
        let b = &entry.bytes;
        let mut hit = |label, found: bool| {
            if found {
                learned.insert(label);
            }
        };
        hit(SecretLabel::ChallengeNonce, secrets.challenge_nonces.iter().any(|rc| contains(b, rc)));
        hit(
            SecretLabel::ResponseNoncePreUse,
            i < first_response && secrets.response_nonces.iter().any(|rr| contains(b, rr)),
        );
        hit(SecretLabel::Password, contains(b, &secrets.password));
        hit(SecretLabel::Pin, contains(b, &secrets.pin));
        hit(SecretLabel::UserPrivateKey, contains_key(b, &secrets.user_sk));
        hit(SecretLabel::BankPrivateKey, contains_key(b, &secrets.bank_sk));
    }
    learned
}

#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub scenario: &'static str,
    /// State of the last session the server opened during the run.
    pub server_final_state: Option<ServerState>,
    pub authenticated_sessions: usize,
    pub client_final_state: ClientState,
    pub client_error: Option<ClientError>,
    /// What the server said back to the attacker's own injected messages.
    pub replies_to_attacker: Vec<Message>,
    pub card_locked: bool,
    pub attacker_learned: BTreeSet<SecretLabel>,
    pub transcript: Vec<TranscriptEntry>,
}

impl AttackOutcome {
    pub fn responses_sent(&self) -> usize {
        self.transcript
            .iter()
            .filter(|e| e.kind == EntryKind::Sent && e.tag() == Some(MessageTag::Response))
            .count()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Card(#[from] CardError),
}

const START_TIME: u64 = 1_700_000_000;

/// One bank, one registered user with a personalized card.
pub struct World {
    pub server: LoginServer,
    pub username: Vec<u8>,
    pub phone: PhoneNumber,
    pub secret: PbtaSecret,
    pub pin: Vec<u8>,
    pub user_sk: PrivateKey,
    pub user_pk: PublicKey,
    pub card: CardState,
    pub now: u64,
    bank_sk_bytes: Vec<u8>,
    rng: ChaCha20Rng,
}

fn random_chars<R: RngCore>(rng: &mut R, alphabet: &[u8], len: usize) -> Vec<u8> {
    (0..len).map(|_| alphabet[rng.uniform_inclusive(alphabet.len() - 1).expect("infallible rng")]).collect()
}

impl World {
    /// Random password (4 to 12 characters), phone and 4 to 8 digit PIN.
    pub fn random(params: Arc<GroupParams>, seed: u64) -> Result<Self, ScenarioError> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let pw_len = 4 + 2 * rng.uniform_inclusive(4).expect("infallible rng");
        let pin_len = 4 + rng.uniform_inclusive(4).expect("infallible rng");
        Self::build(params, &mut rng, pw_len, pin_len)
    }

    pub fn with_lengths(
        params: Arc<GroupParams>,
        seed: u64,
        password_len: usize,
        pin_len: usize,
    ) -> Result<Self, ScenarioError> {
        Self::build(params, &mut ChaCha20Rng::seed_from_u64(seed), password_len, pin_len)
    }

    fn build(
        params: Arc<GroupParams>,
        rng: &mut ChaCha20Rng,
        password_len: usize,
        pin_len: usize,
    ) -> Result<Self, ScenarioError> {
        let entropy = |e| ScenarioError::Protocol(ProtocolError::Entropy(e));
        let (bank_sk, bank_pk) = keygen(&params, Identity::bank("bank").expect("valid"), rng).map_err(entropy)?;
        let bank_sk_bytes = bank_sk.to_bytes();
        let mut master = [0u8; 32];
        rng.fill_bytes(&mut master);
        let bank = BankServer::new(bank_sk, SealKey::new(master), crate::protocol::DEFAULT_TTL, rng)?;

        let username = format!("user{:08x}", rng.next_u32()).into_bytes();
        let mut digits = random_chars(rng, b"0123456789", 12);
        digits[0] = b'6';
        let phone = PhoneNumber::new(&digits).expect("12 digits");
        let secret = PbtaSecret::new(random_chars(rng, &pbta::ALPHABET, password_len)).expect("valid length");
        let pin = random_chars(rng, b"0123456789", pin_len);

        let identity = Identity::user(username.clone()).expect("valid");
        let (user_sk, user_pk) = keygen(&params, identity.clone(), rng).map_err(entropy)?;
        let mut server = LoginServer::new(bank);
        server.bank.register(identity, &secret, phone.clone(), user_pk.clone(), START_TIME, rng)?;
        let card = personalize(&user_sk, &bank_pk, &pin, rng)?;
        Ok(World {
            server,
            username,
            phone,
            secret,
            pin,
            user_sk,
            user_pk,
            card,
            now: START_TIME,
            bank_sk_bytes,
            rng: rng.clone(),
        })
    }

    pub fn bank_pk(&self) -> &PublicKey {
        self.server.bank.bank_pk()
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }
}

/// What the person at the client end has and does.
#[derive(Clone)]
enum Device {
    Card,
    /// Reads `R_c` straight off the challenge, as with an SMS code.
    SmsPhone,
    /// No card at all; makes up a nonce.
    Guess,
}

#[derive(Clone)]
struct Operator {
    secret: PbtaSecret,
    pins: Vec<Vec<u8>>,
    device: Device,
}

struct SmsPhone;

impl CardLink for SmsPhone {
    fn transmit(&mut self, cmd: &CardCommand) -> Result<CardReply, CardError> {
        match cmd {
            CardCommand::TapUnsigncrypt(p) => Nonce::from_slice(p).map(CardReply::Challenge).map_err(|_| CardError::Decode),
            _ => Ok(CardReply::Ok),
        }
    }
}

struct GuessingDevice<'a>(&'a mut ChaCha20Rng);

impl CardLink for GuessingDevice<'_> {
    fn transmit(&mut self, _: &CardCommand) -> Result<CardReply, CardError> {
        crate::terms::generate_nonce(self.0).map(CardReply::Challenge).map_err(|_| CardError::Storage)
    }
}

struct Run<'w> {
    world: &'w mut World,
    channel: SimChannel,
    operator: Operator,
    sms_variant: bool,
    client: ClientSession,
    client_error: Option<ClientError>,
    replies_to_attacker: Vec<Message>,
    opened: Vec<SessionId>,
    challenge_nonces: Vec<Vec<u8>>,
}

impl<'w> Run<'w> {
    fn new(world: &'w mut World, interceptor: Box<dyn Interceptor>, operator: Operator) -> Self {
        let client = ClientSession::new(world.username.clone(), world.phone.clone());
        Run {
            world,
            channel: SimChannel::new(interceptor),
            operator,
            sms_variant: false,
            client,
            client_error: None,
            replies_to_attacker: Vec::new(),
            opened: Vec::new(),
            challenge_nonces: Vec::new(),
        }
    }

    fn execute(mut self, name: &'static str) -> AttackOutcome {
        let hello = self.client.hello().encode();
        self.channel.send(Direction::ToServer, hello);
        while let Some(Delivery { direction, bytes, injected }) = self.channel.next() {
            self.world.now += 1;
            let Some(bytes) = bytes else { continue };
            match direction {
                Direction::ToServer => self.server_step(&bytes, injected),
                Direction::ToClient => self.client_step(&bytes),
            }
        }
        self.finish(name)
    }

    fn server_step(&mut self, bytes: &[u8], injected: bool) {
        let w = &mut *self.world;
        // Undecodable or unroutable input is dropped by the server.
        let Ok(reply) = w.server.handle_bytes(bytes, w.now, &mut w.rng) else { return };
        let mut msg = Message::decode(&reply).expect("server output decodes");
        match &mut msg {
            Message::GridOffer { session_id, .. } => self.opened.push(*session_id),
            Message::Challenge { payload, .. } => {
                // The harness holds every key, so it can note the real R_c.
                let p = SigncryptedPayload::from_bytes(payload).expect("server payload");
                let rc = unsigncrypt(&w.user_sk, w.server.bank.bank_pk(), &p).expect("honest payload");
                if self.sms_variant {
                    *payload = rc.clone();
                }
                self.challenge_nonces.push(rc);
            }
            _ => {}
        }
        if injected {
            self.replies_to_attacker.push(msg.clone());
        }
        self.channel.send(Direction::ToClient, msg.encode());
    }

    fn client_step(&mut self, bytes: &[u8]) {
        if self.client_error.is_some() || self.client.state() == ClientState::Done {
            return;
        }
        let Ok(msg) = Message::decode(bytes) else {
            self.client_error = Some(ClientError::UnexpectedMessage);
            return;
        };
        let w = &mut *self.world;
        let outcome = match self.client.state() {
            ClientState::Started => self.client.receive_grid_offer(&msg).map(|grid| {
                Some(derive_response(&self.operator.secret, grid))
            }),
            ClientState::CredentialsSent => {
                let sent = match self.operator.device {
                    Device::Card => {
                        for pin in &self.operator.pins {
                            if let CardReply::PinAccepted(_) = w.card.verify_pin(pin) {
                                break;
                            }
                        }
                        self.client.process_challenge(&mut w.card, &msg)
                    }
                    Device::SmsPhone => self.client.process_challenge(&mut SmsPhone, &msg),
                    Device::Guess => self.client.process_challenge(&mut GuessingDevice(&mut w.rng), &msg),
                };
                match sent {
                    Ok(response) => {
                        self.channel.send(Direction::ToServer, response.encode());
                        Ok(None)
                    }
                    Err(e) => Err(e),
                }
            }
            ClientState::ResponseSent => self.client.receive_result(&msg).map(|_| None),
            _ => Err(ClientError::State),
        };
        match outcome {
            Ok(Some(response)) => {
                let creds = self.client.send_credentials(response).expect("grid just received");
                self.channel.send(Direction::ToServer, creds.encode());
            }
            Ok(None) => {}
            Err(e) => self.client_error = Some(e),
        }
    }

    fn finish(self, name: &'static str) -> AttackOutcome {
        let w = self.world;
        let transcript = self.channel.into_transcript();
        let secrets = RunSecrets {
            challenge_nonces: self.challenge_nonces,
            response_nonces: w
                .server
                .sessions()
                .filter_map(|s| s.expected_rr().map(|d| d.as_bytes().to_vec()))
                .collect(),
            password: w.secret.as_bytes().to_vec(),
            pin: w.pin.clone(),
            user_sk: w.user_sk.to_bytes(),
            bank_sk: w.bank_sk_bytes.clone(),
        };
        let attacker_learned = learned_from_transcript(&transcript, &secrets);
        let server_final_state = self.opened.last().and_then(|id| w.server.session(id)).map(|s| s.state());
        AttackOutcome {
            scenario: name,
            server_final_state,
            authenticated_sessions: w.server.sessions().filter(|s| s.state() == ServerState::Authenticated).count(),
            client_final_state: self.client.state(),
            client_error: self.client_error,
            replies_to_attacker: self.replies_to_attacker,
            card_locked: w.card.is_locked(),
            attacker_learned,
            transcript,
        }
    }
}

fn decode_to_client(bytes: &[u8], tag: MessageTag) -> Option<Message> {
    (bytes.first() == Some(&(tag as u8))).then(|| Message::decode(bytes).ok()).flatten()
}

struct Replayer {
    captured: Option<Vec<u8>>,
    replayed: bool,
}

impl Interceptor for Replayer {
    fn intercept(&mut self, d: Direction, bytes: &[u8]) -> Action {
        if d == Direction::ToServer && bytes.first() == Some(&(MessageTag::Response as u8)) {
            self.captured.get_or_insert_with(|| bytes.to_vec());
        }
        Action::Deliver
    }

    fn on_idle(&mut self) -> Vec<(Direction, Vec<u8>)> {
        match (&self.captured, self.replayed) {
            (Some(b), false) => {
                self.replayed = true;
                vec![(Direction::ToServer, b.clone())]
            }
            _ => Vec::new(),
        }
    }
}

struct Tamperer(ChaCha20Rng);

impl Interceptor for Tamperer {
    fn intercept(&mut self, d: Direction, bytes: &[u8]) -> Action {
        match (d, decode_to_client(bytes, MessageTag::Challenge)) {
            (Direction::ToClient, Some(Message::Challenge { session_id, mut payload })) => {
                let pos = self.0.uniform_inclusive(payload.len() - 1).expect("infallible rng");
                let bit = self.0.uniform_inclusive(7).expect("infallible rng");
                payload[pos] ^= 1 << bit;
                Action::Replace(Message::Challenge { session_id, payload }.encode())
            }
            _ => Action::Deliver,
        }
    }
}

/// Replaces the bank's challenge with one signcrypted under the attacker's
/// own key to the real user.
struct Spoofer {
    attacker_sk: PrivateKey,
    user_pk: PublicKey,
    rng: ChaCha20Rng,
}

impl Interceptor for Spoofer {
    fn intercept(&mut self, d: Direction, bytes: &[u8]) -> Action {
        match (d, decode_to_client(bytes, MessageTag::Challenge)) {
            (Direction::ToClient, Some(Message::Challenge { session_id, .. })) => {
                let rc = crate::terms::generate_nonce(&mut self.rng).expect("infallible rng");
                let payload = signcrypt(&self.attacker_sk, &self.user_pk, rc.as_bytes(), &mut self.rng)
                    .expect("attacker key on the same group")
                    .to_bytes();
                Action::Replace(Message::Challenge { session_id, payload }.encode())
            }
            _ => Action::Deliver,
        }
    }
}

/// Watches one honest login, then opens its own session for the same user
/// and submits the PBTA response it saw.
#[derive(Default)]
struct StaleReplayer {
    username: Option<Vec<u8>>,
    first_session: Option<SessionId>,
    stale: Option<PbtaResponse>,
    own_session: Option<SessionId>,
    phase: u8,
}

impl Interceptor for StaleReplayer {
    fn intercept(&mut self, d: Direction, bytes: &[u8]) -> Action {
        let Ok(msg) = Message::decode(bytes) else { return Action::Deliver };
        match (d, msg) {
            (Direction::ToServer, Message::Hello { username }) => {
                self.username.get_or_insert(username);
            }
            (Direction::ToServer, Message::Credentials { session_id, response }) if self.stale.is_none() => {
                self.first_session = Some(session_id);
                self.stale = Some(response);
            }
            (Direction::ToClient, m) => {
                let sid = m.session_id();
                if self.first_session.is_some() && sid != self.first_session {
                    // Replies in the attacker's own session stop here.
                    if let (Message::GridOffer { session_id, .. }, None) = (&m, self.own_session) {
                        self.own_session = Some(*session_id);
                    }
                    return Action::Drop;
                }
            }
            _ => {}
        }
        Action::Deliver
    }

    fn on_idle(&mut self) -> Vec<(Direction, Vec<u8>)> {
        self.phase += 1;
        match (self.phase, &self.username, &self.stale, self.own_session) {
            (1, Some(u), Some(_), _) => vec![(Direction::ToServer, Message::Hello { username: u.clone() }.encode())],
            (2, _, Some(r), Some(sid)) => {
                vec![(Direction::ToServer, Message::Credentials { session_id: sid, response: r.clone() }.encode())]
            }
            _ => Vec::new(),
        }
    }
}

fn pin_guesses<R: RngCore>(rng: &mut R, len: usize, count: usize) -> Vec<Vec<u8>> {
    (0..count).map(|_| random_chars(rng, b"0123456789", len)).collect()
}

/// Runs one named attack on the default group.
pub fn run_scenario(scenario: Scenario, seed: u64) -> Result<AttackOutcome, ScenarioError> {
    run_scenario_on(scenario, Arc::new(GroupParams::default_group()), seed)
}

pub fn run_scenario_on(
    scenario: Scenario,
    params: Arc<GroupParams>,
    seed: u64,
) -> Result<AttackOutcome, ScenarioError> {
    let mut world = World::with_lengths(params.clone(), seed, 6, 6)?;
    let attacker_rng = ChaCha20Rng::seed_from_u64(seed ^ 0xA77A_C4E5);
    let honest = Operator { secret: world.secret.clone(), pins: vec![world.pin.clone()], device: Device::Card };
    let interceptor: Box<dyn Interceptor> = match scenario {
        Scenario::PassiveEavesdrop | Scenario::StolenCardNoPin | Scenario::SmsOtpCanary => {
            Box::new(super::channel::Honest)
        }
        Scenario::ReplayResponse => Box::new(Replayer { captured: None, replayed: false }),
        Scenario::TamperChallenge => Box::new(Tamperer(attacker_rng.clone())),
        Scenario::SpoofServer => {
            let mut rng = attacker_rng.clone();
            let (attacker_sk, _) = keygen(&params, Identity::bank("bank").expect("valid"), &mut rng)
                .map_err(|e| ScenarioError::Protocol(e.into()))?;
            Box::new(Spoofer { attacker_sk, user_pk: world.user_pk.clone(), rng })
        }
        Scenario::StalePbtaReplay => Box::<StaleReplayer>::default(),
    };
    let operator = match scenario {
        Scenario::StolenCardNoPin => {
            // The thief knows the password but has to guess the PIN; the
            // fourth guess shows the lock holding.
            let mut rng = attacker_rng.clone();
            Operator { pins: pin_guesses(&mut rng, world.pin.len(), 4), ..honest }
        }
        Scenario::SmsOtpCanary => Operator { device: Device::SmsPhone, ..honest },
        _ => honest,
    };
    let mut run = Run::new(&mut world, interceptor, operator);
    run.sms_variant = scenario == Scenario::SmsOtpCanary;
    Ok(run.execute(scenario.name()))
}

/// A login attempt by someone holding everything but the given factor.
pub fn run_ablation(ablation: Ablation, params: Arc<GroupParams>, seed: u64) -> Result<AttackOutcome, ScenarioError> {
    // Twelve characters keeps the chance that a wrong password still yields
    // the right grid response near 36^-6.
    let mut world = World::with_lengths(params.clone(), seed, 12, 6)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xAB1A_7E);
    let mut operator = Operator { secret: world.secret.clone(), pins: vec![world.pin.clone()], device: Device::Card };
    match ablation {
        Ablation::WrongPassword => {
            let mut pw = random_chars(&mut rng, &pbta::ALPHABET, 12);
            while pw == world.secret.as_bytes() {
                pw = random_chars(&mut rng, &pbta::ALPHABET, 12);
            }
            operator.secret = PbtaSecret::new(pw).expect("valid length");
        }
        Ablation::NoCard => operator.device = Device::Guess,
        Ablation::ThreeWrongPins => {
            let mut guesses = Vec::new();
            while guesses.len() < 3 {
                let g = random_chars(&mut rng, b"0123456789", world.pin.len());
                if g != world.pin {
                    guesses.push(g);
                }
            }
            // The right PIN, entered after the lock, must not help.
            guesses.push(world.pin.clone());
            operator.pins = guesses;
        }
        Ablation::WrongUserKey => {
            let holder = Identity::user(world.username.clone()).expect("valid");
            let (other_sk, _) = keygen(&params, holder, &mut rng).map_err(|e| ScenarioError::Protocol(e.into()))?;
            world.card = personalize(&other_sk, world.bank_pk(), &world.pin, &mut rng)?;
        }
    }
    Ok(Run::new(&mut world, Box::new(super::channel::Honest), operator).execute(ablation.name()))
}

/// A plain honest login over an honest channel.
pub fn run_honest(world: &mut World) -> AttackOutcome {
    let operator = Operator { secret: world.secret.clone(), pins: vec![world.pin.clone()], device: Device::Card };
    Run::new(world, Box::new(super::channel::Honest), operator).execute("honest")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StaleStats {
    pub trials: u64,
    pub accepted: u64,
}

impl StaleStats {
    pub fn rate(&self) -> f64 {
        self.accepted as f64 / self.trials as f64
    }
}

/// Monte Carlo of the stale-response attack at the credentials stage: each
/// trial registers a fresh random password, lets the attacker observe one
/// honest PBTA response, and submits it against a new session's grid.
/// Runs on the toy group; the group plays no part in the PBTA check.
pub fn stale_replay_rate(trials: u64, password_len: usize, seed: u64) -> Result<StaleStats, ScenarioError> {
    let params = Arc::new(GroupParams::toy());
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (bank_sk, _) = keygen(&params, Identity::bank("bank").expect("valid"), &mut rng)
        .map_err(|e| ScenarioError::Protocol(e.into()))?;
    let mut server = LoginServer::new(BankServer::new(bank_sk, SealKey::new([0x5A; 32]), 60, &mut rng)?);
    let phone = PhoneNumber::new("6200000000").expect("valid");
    let mut accepted = 0;
    for i in 0..trials {
        let username = format!("u{i}").into_bytes();
        let secret = PbtaSecret::new(random_chars(&mut rng, &pbta::ALPHABET, password_len))
            .map_err(ProtocolError::from)?;
        let identity = Identity::user(username.clone()).expect("valid");
        let (_, user_pk) = keygen(&params, identity.clone(), &mut rng).map_err(|e| ScenarioError::Protocol(e.into()))?;
        server.bank.register(identity, &secret, phone.clone(), user_pk, START_TIME, &mut rng)?;

        let hello = Message::Hello { username };
        let Message::GridOffer { grid: seen, .. } = server.handle(&hello, START_TIME, &mut rng)? else {
            unreachable!("hello always gets a grid")
        };
        let stale = derive_response(&secret, &seen);
        let Message::GridOffer { session_id, .. } = server.handle(&hello, START_TIME, &mut rng)? else {
            unreachable!("hello always gets a grid")
        };
        let creds = Message::Credentials { session_id, response: stale };
        if let Message::Challenge { .. } = server.handle(&creds, START_TIME, &mut rng)? {
            accepted += 1;
        }
    }
    Ok(StaleStats { trials, accepted })
}
