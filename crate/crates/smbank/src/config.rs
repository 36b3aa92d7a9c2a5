//! `key = value` service configuration.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use smbank_core::seal::SealKey;
use smbank_core::signcrypt::GroupKind;
use zeroize::Zeroize;

pub const DEFAULT_MASTER_KEY_ENV: &str = "SMBANK_MASTER_KEY";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`")]
    Value { line: usize, key: String },
    #[error("ttl must be at least 1 second")]
    Ttl,
    #[error("environment variable {0} is not set")]
    MasterKeyMissing(String),
    #[error("environment variable {0} must hold 32 bytes of hex")]
    MasterKeyFormat(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerConfig {
    pub listen: SocketAddr,
    pub store: PathBuf,
    pub cards_dir: PathBuf,
    pub bank_key: PathBuf,
    pub master_key_env: String,
    pub group: GroupKind,
    pub ttl: u64,
    pub log: String,
    /// Exposes `POST /card/{id}/command` for the browser demo.
    pub demo_card_endpoint: bool,
}

impl ServerConfig {
    /// Defaults with every file placed under `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        ServerConfig {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            store: dir.join("accounts.jsonl"),
            cards_dir: dir.join("cards"),
            bank_key: dir.join("bank.key"),
            master_key_env: DEFAULT_MASTER_KEY_ENV.into(),
            group: GroupKind::Default,
            ttl: smbank_core::protocol::DEFAULT_TTL,
            log: "info".into(),
            demo_card_endpoint: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Relative paths in the text resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::in_dir(base);
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || ConfigError::Value { line, key: key.into() };
            match key {
                "listen" => cfg.listen = value.parse().map_err(|_| bad())?,
                "store" => cfg.store = base.join(value),
                "cards_dir" => cfg.cards_dir = base.join(value),
                "bank_key" => cfg.bank_key = base.join(value),
                "master_key_env" if !value.is_empty() => cfg.master_key_env = value.into(),
                "group" => {
                    cfg.group = match value {
                        "toy" => GroupKind::Toy,
                        "default" => GroupKind::Default,
                        _ => return Err(bad()),
                    }
                }
                "ttl" => cfg.ttl = value.parse().map_err(|_| bad())?,
                "log" => cfg.log = value.into(),
                "demo_card_endpoint" => cfg.demo_card_endpoint = value.parse().map_err(|_| bad())?,
                "master_key_env" => return Err(bad()),
                _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
            }
        }
        if cfg.ttl == 0 {
            return Err(ConfigError::Ttl);
        }
        Ok(cfg)
    }

    pub fn master_key(&self) -> Result<SealKey, ConfigError> {
        let mut hexed = std::env::var(&self.master_key_env)
            .map_err(|_| ConfigError::MasterKeyMissing(self.master_key_env.clone()))?;
        let decoded = parse_master_key(hexed.trim());
        hexed.zeroize();
        decoded.ok_or_else(|| ConfigError::MasterKeyFormat(self.master_key_env.clone()))
    }
}

pub fn parse_master_key(hexed: &str) -> Option<SealKey> {
    let mut key = [0u8; 32];
    hex::decode_to_slice(hexed, &mut key).ok()?;
    let k = SealKey::new(key);
    key.zeroize();
    Some(k)
}
