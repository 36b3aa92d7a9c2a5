mod common;

use std::path::Path;
use std::process::{Command, Output};

use smbank_core::signcrypt::GroupKind;

fn smbank(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smbank"))
        .args(args)
        .current_dir(cwd)
        .env("SMBANK_MASTER_KEY", common::MASTER_HEX)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &[][..],
        &["--frobnicate"],
        &["bench", "--trials", "many"],
        &["attack", "--scenario", "mitm"],
        &["check", "--bounds", "sessions=0"],
        &["check", "--model", "scyther"],
        &["login", "--user", "a"],
        &["register", "--user", "a", "--phone", "628123456789", "--password", "ABCD", "--pin", "1234"],
    ] {
        let o = smbank(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(smbank(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn check_smbank_model_reports_no_attacks() {
    let dir = tempfile::tempdir().unwrap();
    let o = smbank(&["check", "--bounds", "sessions=2,depth=6", "--report", "verdicts.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for claim in ["Secret(R_c)", "Secret(b)", "Secret(R_r pre-use)", "Agreement(R_c)"] {
        assert!(out.lines().any(|l| l.contains(claim) && l.contains("No attacks within bounds")), "{claim}\n{out}");
    }
    let report = std::fs::read_to_string(dir.path().join("verdicts.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = report.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|l| l["status"] == "No attacks within bounds" && l["sessions"] == 2 && l["depth"] == 6));
}

#[test]
fn check_canary_finds_the_attack_and_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let o = smbank(&["check", "--model", "canary", "--report", "c.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.contains("Secret(R_c)") && l.contains("Attack found")), "{out}");
    let report = std::fs::read_to_string(dir.path().join("c.jsonl")).unwrap();
    let rc: serde_json::Value = report
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .find(|v| v["claim"] == "Secret(R_c)")
        .unwrap();
    assert_eq!(rc["trace_replays"], true);
    assert!(!rc["trace"].as_array().unwrap().is_empty());
}

#[test]
fn bench_prints_report_and_holds() {
    let dir = tempfile::tempdir().unwrap();
    let o = smbank(&["bench", "--trials", "100", "--group", "toy"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("exponentiations"));
    let o = smbank(&["bench", "--trials", "100", "--json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!((v["signcrypt_total_exps"].as_u64(), v["baseline_total_exps"].as_u64()), (Some(300), Some(600)));
    assert_eq!(v["group"], "default");
    assert_eq!(v["cheaper_every_run"], true);
    assert!(v["signcrypt_overhead_bytes"].as_u64() < v["baseline_overhead_bytes"].as_u64());
}

#[test]
fn attack_scenarios_meet_their_contracts() {
    let dir = tempfile::tempdir().unwrap();
    for s in ["passive_eavesdrop", "replay_response", "tamper_challenge", "spoof_server", "stale_pbta_replay", "stolen_card_no_pin", "sms_otp_canary"] {
        let o = smbank(&["attack", "--scenario", s, "--seed", "7", "--group", "toy"], dir.path());
        assert_eq!(o.status.code(), Some(0), "{s}: {}", stdout(&o));
        assert!(stdout(&o).contains("contract: met"));
    }
    let o = smbank(&["attack", "--scenario", "tamper_challenge", "--seed", "1", "--transcript"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("Modified"));
}

#[test]
fn register_then_login_offline_and_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let conf = common::write_config(dir.path(), GroupKind::Toy, false);
    let conf = conf.to_str().unwrap();
    let reg = ["register", "--user", "dave", "--phone", "628555000111", "--password", "PLUM88", "--pin", "5150", "--card", "dave.card", "--config", conf];
    let o = smbank(&reg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("dave.card").exists());
    // Registering twice fails at runtime, not as a usage error.
    assert_eq!(smbank(&reg, dir.path()).status.code(), Some(1));

    let login = |password: &str, pin: &str, target: [&str; 2]| {
        smbank(
            &["login", "--user", "dave", "--phone", "628555000111", "--password", password, "--pin", pin, "--card", "dave.card", target[0], target[1]],
            dir.path(),
        )
    };
    let o = login("PLUM88", "5150", ["--config", conf]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("authenticated"));
    assert_eq!(login("PEAR88", "5150", ["--config", conf]).status.code(), Some(1));

    let cfg = common::config(dir.path(), GroupKind::Toy, false);
    let server = smbank::BackgroundServer::start(common::open(&cfg), "127.0.0.1:0".parse().unwrap()).unwrap();
    let url = server.url();
    let o = login("PLUM88", "5150", ["--server", &url]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = login("PLUM88", "9999", ["--server", &url]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("PIN rejected"));
}

#[test]
fn serve_fails_fast_on_busy_port_or_missing_key() {
    let dir = tempfile::tempdir().unwrap();
    let busy = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = busy.local_addr().unwrap().port();
    let conf = dir.path().join("busy.conf");
    std::fs::write(&conf, format!("listen = 127.0.0.1:{port}\ngroup = toy\n")).unwrap();
    let o = smbank(&["serve", "--config", conf.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot listen"));

    let o = Command::new(env!("CARGO_BIN_EXE_smbank"))
        .args(["serve", "--config", conf.to_str().unwrap()])
        .env_remove("SMBANK_MASTER_KEY")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("SMBANK_MASTER_KEY"));

    std::fs::write(&conf, "ttl = 0\n").unwrap();
    let o = smbank(&["serve", "--config", conf.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
}
