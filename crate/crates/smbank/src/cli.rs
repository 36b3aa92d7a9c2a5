//! Command-line front end. Usage errors exit 2 (clap's convention); a
//! run that does not meet its contract exits 1.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::rngs::OsRng;
use smbank_core::adversary::symbolic::{symbolic_check, Bounds, Claim, Model, SecretTerm, Status};
use smbank_core::adversary::{run_scenario_on, Scenario};
use smbank_core::signcrypt::{cost_report, GroupKind};

use crate::api::RegisterRequest;
use crate::client::{login, HttpTransport, InProcess, LoginInput, Transport};
use crate::config::ServerConfig;
use crate::keys::{load_card, named_group, save_card};
use crate::report::{BenchSummary, VerdictLine};
use crate::service::{serve, Service};

#[derive(Debug, Parser)]
#[command(name = "smbank", version, about = "S-MBank bank service and tooling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Create an account and write its card file.
    Register {
        #[arg(long)]
        user: String,
        #[arg(long)]
        phone: String,
        #[arg(long)]
        password: String,
        #[arg(long)]
        pin: String,
        /// Where to write the card file; defaults to `<user>.card`.
        #[arg(long)]
        card: Option<PathBuf>,
        #[command(flatten)]
        target: Target,
    },
    /// Scripted login with a card file.
    Login {
        #[arg(long)]
        user: String,
        #[arg(long)]
        phone: String,
        #[arg(long)]
        password: String,
        #[arg(long)]
        pin: String,
        #[arg(long)]
        card: PathBuf,
        #[command(flatten)]
        target: Target,
    },
    /// Compare signcryption against sign-then-encrypt.
    Bench {
        #[arg(long, default_value_t = 100)]
        trials: u32,
        #[arg(long, value_enum, default_value_t = Group::Default)]
        group: Group,
        #[arg(long, default_value_t = 32)]
        message_len: usize,
        #[arg(long)]
        json: bool,
    },
    /// Run one concrete attack scenario.
    Attack {
        #[arg(long, value_parser = parse_scenario)]
        scenario: Scenario,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Group::Default)]
        group: Group,
        /// Print the channel transcript.
        #[arg(long)]
        transcript: bool,
    },
    /// Bounded symbolic check of the protocol model.
    Check {
        #[arg(long, value_parser = parse_bounds, default_value = "sessions=2,depth=6")]
        bounds: Bounds,
        #[arg(long, value_enum, default_value_t = ModelName::Smbank)]
        model: ModelName,
        /// Also write one JSON object per claim to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Target {
    /// Base URL of a running service.
    #[arg(long)]
    server: Option<String>,
    /// Operate on the service's files directly.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Group {
    Toy,
    Default,
}

impl From<Group> for GroupKind {
    fn from(g: Group) -> Self {
        match g {
            Group::Toy => GroupKind::Toy,
            Group::Default => GroupKind::Default,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelName {
    Smbank,
    PublicPhone,
    Canary,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    Scenario::from_name(s).map_err(|e| {
        let names: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
        format!("{e}; expected one of {}", names.join(", "))
    })
}

pub fn parse_bounds(s: &str) -> Result<Bounds, String> {
    let mut b = Bounds::default();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("`{part}` is not key=value"))?;
        let n: usize = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
        match k.trim() {
            "sessions" if n >= 1 => b.sessions = n,
            "depth" if n >= 1 => b.depth = n,
            "max_states" if n >= 1 => b.max_states = n,
            "sessions" | "depth" | "max_states" => return Err(format!("{k} must be at least 1")),
            other => return Err(format!("unknown bound `{other}`")),
        }
    }
    Ok(b)
}

fn master_key_for(cfg: &ServerConfig) -> anyhow::Result<smbank_core::seal::SealKey> {
    Ok(cfg.master_key()?)
}

fn open_service(config: &Path) -> anyhow::Result<Arc<Service>> {
    let cfg = ServerConfig::load(config)?;
    let master = master_key_for(&cfg)?;
    Ok(Arc::new(Service::open(&cfg, master)?))
}

fn transport(target: &Target) -> anyhow::Result<Box<dyn Transport>> {
    Ok(match (&target.server, &target.config) {
        (Some(url), _) => Box::new(HttpTransport::new(url.clone())?),
        (None, Some(cfg)) => Box::new(InProcess(open_service(cfg)?)),
        (None, None) => bail!("one of --server or --config is required"),
    })
}

fn init_logging(default: &str) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

/// `Ok(false)` means the command ran but its contract did not hold.
pub fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Serve { config } => {
            let cfg = ServerConfig::load(&config)?;
            init_logging(&cfg.log);
            let master = master_key_for(&cfg)?;
            let svc = Arc::new(Service::open(&cfg, master)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(cfg.listen)
                    .await
                    .with_context(|| format!("cannot listen on {}", cfg.listen))?;
                tracing::info!(addr = %listener.local_addr()?, "listening");
                serve(svc, listener, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
                anyhow::Ok(())
            })?;
            Ok(true)
        }
        Command::Register { user, phone, password, pin, card, target } => {
            init_logging("warn");
            let mut t = transport(&target)?;
            let resp = t.register(&RegisterRequest { username: user.clone(), phone, password, pin })?;
            let path = card.unwrap_or_else(|| PathBuf::from(format!("{user}.card")));
            let bytes = B64.decode(&resp.card).context("card file in reply")?;
            std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            println!("registered {} card {} -> {}", resp.username, resp.card_id, path.display());
            Ok(true)
        }
        Command::Login { user, phone, password, pin, card, target } => {
            init_logging("warn");
            let mut t = transport(&target)?;
            let mut state = load_card(&card).with_context(|| format!("loading {}", card.display()))?;
            let input = LoginInput { username: &user, phone: &phone, password: &password, pin: &pin };
            let outcome = login(t.as_mut(), &mut state, &input);
            save_card(&card, &state).context("saving card state")?;
            match outcome {
                Ok(report) => {
                    for (tag, len) in &report.trace {
                        println!("{tag:<12} {len:>5} bytes");
                    }
                    println!("session {} {}", report.session, report.server_state);
                    Ok(report.server_state == "authenticated")
                }
                Err(e) => {
                    println!("login failed: {e}");
                    Ok(false)
                }
            }
        }
        Command::Bench { trials, group, message_len, json } => {
            let kind = GroupKind::from(group);
            let report = cost_report(&named_group(kind), message_len, trials, &mut OsRng)
                .map_err(|e| anyhow!("bench: {e}"))?;
            let summary = BenchSummary::new(kind.name(), &report);
            if json {
                println!("{}", serde_json::to_string(&summary)?);
            } else {
                println!("{}", summary.render());
            }
            Ok(summary.holds())
        }
        Command::Attack { scenario, seed, group, transcript } => {
            let outcome = run_scenario_on(scenario, named_group(group.into()), seed)?;
            println!("scenario {} seed {seed}", scenario.name());
            println!(
                "  server {}  client {:?}  authenticated sessions {}",
                outcome.server_final_state.map(|s| s.name()).unwrap_or("none"),
                outcome.client_final_state,
                outcome.authenticated_sessions
            );
            if let Some(e) = &outcome.client_error {
                println!("  client error: {e}");
            }
            let learned: Vec<_> = outcome.attacker_learned.iter().map(|l| l.name()).collect();
            println!("  attacker learned: {}", if learned.is_empty() { "nothing".into() } else { learned.join(", ") });
            if transcript {
                for e in &outcome.transcript {
                    let tag = e.tag().map(crate::api::tag_name).unwrap_or("?");
                    println!("  {:>3} {:?} {:?} {tag} {} bytes", e.seq, e.direction, e.kind, e.bytes.len());
                }
            }
            match scenario.check(&outcome) {
                Ok(()) => {
                    println!("contract: met");
                    Ok(true)
                }
                Err(why) => {
                    println!("contract: VIOLATED ({why})");
                    Ok(false)
                }
            }
        }
        Command::Check { bounds, model, report } => {
            let m = match model {
                ModelName::Smbank => Model::smbank(),
                ModelName::PublicPhone => Model::smbank_public_phone(),
                ModelName::Canary => Model::sms_otp_variant(),
            };
            let verdicts = symbolic_check(&m, bounds);
            let mut lines = Vec::new();
            for v in &verdicts {
                println!("{v}");
                lines.push(VerdictLine::new(&m, v));
            }
            if let Some(path) = report {
                let mut f = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                for l in &lines {
                    writeln!(f, "{}", l.to_json())?;
                }
            }
            let ok = match model {
                ModelName::Smbank | ModelName::PublicPhone => {
                    verdicts.iter().all(|v| v.status == Status::NoAttackWithinBounds)
                }
                ModelName::Canary => lines.iter().zip(&verdicts).any(|(l, v)| {
                    v.claim == Claim::Secret(SecretTerm::ChallengeNonce)
                        && matches!(v.status, Status::AttackFound(_))
                        && l.trace_replays == Some(true)
                }),
            };
            Ok(ok)
        }
    }
}
