//! The shared end-to-end secret scan.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use smbank::api::{MessageRequest, MessageResponse, RegisterRequest};
use smbank::keys::{load_bank_key, named_group};
use smbank::BackgroundServer;
use smbank_core::pbta::{derive_response, PbtaResponse, PbtaSecret};
use smbank_core::protocol::Message;
use smbank_core::signcrypt::{keygen, GroupKind};
use smbank_core::smartcard::{CardCommand, CardLink, CardReply, CardState};
use smbank_core::terms::{derive_response_nonce, Identity, PhoneNumber};

use super::scan::{capture_logs, Scanner};

pub struct ScanRun {
    pub findings: Vec<(String, String)>,
    pub corpus_len: usize,
    /// The log capture saw the service's own login lines.
    pub logs_wired: bool,
}

const USER: &str = "carol";
const PHONE: &str = "6281122334455";
const PASSWORD: &str = "QUINCE7FIG2X";
const PIN: &str = "73915048";

fn post(url: &str, body: String) -> String {
    reqwest::blocking::Client::new()
        .post(url)
        .header("content-type", "application/json")
        .body(body)
        .send()
        .unwrap()
        .text()
        .unwrap()
}

/// Drives a full service run (registration, three logins with replays and
/// status reads, failing credentials, an unknown user) and byte-scans every
/// reply, file and log line for the secrets involved.
pub fn service_scan() -> ScanRun {
    let logs = capture_logs();
    let dir = tempfile::tempdir().unwrap();
    let cfg = super::config(dir.path(), GroupKind::Default, false);
    let svc = super::open(&cfg);
    let params = named_group(GroupKind::Default);
    let (user_sk, _) = keygen(&params, Identity::user(USER).unwrap(), &mut rand::rngs::OsRng).unwrap();
    let req = RegisterRequest { username: USER.into(), phone: PHONE.into(), password: PASSWORD.into(), pin: PIN.into() };
    let registered = svc.register_with_key(&req, &user_sk).unwrap();
    let mut card = CardState::from_bytes(&B64.decode(&registered.card).unwrap()).unwrap();

    let mut scan = Scanner::default();
    scan.observe_text("register response", &serde_json::to_string(&registered).unwrap());
    scan.secret("password", PASSWORD.as_bytes());
    scan.secret("pin", PIN.as_bytes());
    scan.secret("user private key", &user_sk.to_bytes());
    let bank_sk = load_bank_key(&cfg.bank_key, &params, &super::parse_master()).unwrap();
    scan.secret("bank private key", &bank_sk.to_bytes());

    let server = BackgroundServer::start(svc, "127.0.0.1:0".parse().unwrap()).unwrap();
    let url = |p: &str| format!("{}{p}", server.url());
    let secret = PbtaSecret::new(PASSWORD).unwrap();
    let phone = PhoneNumber::new(PHONE).unwrap();
    let step = |path: &str, msg: &Message, scan: &mut Scanner| -> Message {
        let text = post(&url(path), serde_json::to_string(&MessageRequest::new(msg)).unwrap());
        scan.observe_text(path, &text);
        serde_json::from_str::<MessageResponse>(&text).unwrap().decode_message().unwrap()
    };

    for round in 0..3 {
        let Message::GridOffer { session_id, grid } = step("/login/hello", &Message::Hello { username: USER.into() }, &mut scan)
        else {
            panic!("no grid")
        };
        let creds = Message::Credentials { session_id, response: derive_response(&secret, &grid) };
        let Message::Challenge { payload, .. } = step("/login/credentials", &creds, &mut scan) else { panic!("no challenge") };
        assert!(matches!(card.transmit(&CardCommand::VerifyPin(PIN.as_bytes().to_vec())), Ok(CardReply::PinAccepted(_))));
        let Ok(CardReply::Challenge(rc)) = card.transmit(&CardCommand::TapUnsigncrypt(payload)) else { panic!("tap") };
        scan.secret(&format!("R_c round {round}"), rc.as_bytes());
        let rr = derive_response_nonce(&rc, &phone);
        // R_r must never come back from the server either.
        scan.secret(&format!("R_r round {round}"), rr.as_bytes());
        let findings = scan.findings();
        assert!(findings.is_empty(), "pre-use leak: {findings:?}");
        let resp = Message::Response { session_id, rr };
        assert!(matches!(step("/login/response", &resp, &mut scan), Message::Result { status: 0, .. }));
        // A replay and a status query, for the failure and read paths.
        assert!(matches!(step("/login/response", &resp, &mut scan), Message::Reject { .. }));
        let status = reqwest::blocking::get(url(&format!("/login/{}/status", hex::encode(session_id.as_bytes()))))
            .unwrap()
            .text()
            .unwrap();
        scan.observe_text("status", &status);
    }
    // Failing credentials and an unknown user.
    for user in [USER, "mallory"] {
        let Message::GridOffer { session_id, .. } = step("/login/hello", &Message::Hello { username: user.into() }, &mut scan)
        else {
            panic!()
        };
        let creds = Message::Credentials { session_id, response: PbtaResponse::new("ZZZZZZ").unwrap() };
        assert!(matches!(step("/login/credentials", &creds, &mut scan), Message::Reject { .. }));
    }
    server.stop().unwrap();

    scan.observe_dir(dir.path());
    let text = logs.text();
    scan.observe_text("logs", &text);
    ScanRun { findings: scan.findings(), corpus_len: scan.corpus_len(), logs_wired: text.contains("login step") }
}

