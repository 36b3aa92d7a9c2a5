#![allow(dead_code)]

pub mod hygiene;
pub mod scan;

use std::path::Path;
use std::sync::Arc;

use smbank::config::{parse_master_key, ServerConfig};
use smbank::Service;
use smbank_core::signcrypt::GroupKind;

pub const MASTER_HEX: &str = "5f1e2d3c4b5a69788796a5b4c3d2e1f00f1e2d3c4b5a69788796a5b4c3d2e1f0";

pub fn config(dir: &Path, group: GroupKind, demo: bool) -> ServerConfig {
    let mut cfg = ServerConfig::in_dir(dir);
    cfg.group = group;
    cfg.demo_card_endpoint = demo;
    cfg.listen = "127.0.0.1:0".parse().unwrap();
    cfg
}

/// Writes the same settings as a config file and returns its path.
pub fn write_config(dir: &Path, group: GroupKind, demo: bool) -> std::path::PathBuf {
    let path = dir.join("smbank.conf");
    let text = format!(
        "# test service\nlisten = 127.0.0.1:0\nstore = accounts.jsonl\ncards_dir = cards\nbank_key = bank.key\n\
         group = {}\nttl = 60\nlog = warn\ndemo_card_endpoint = {demo}\n",
        group.name()
    );
    std::fs::write(&path, text).unwrap();
    path
}

pub fn open(cfg: &ServerConfig) -> Arc<Service> {
    Arc::new(Service::open(cfg, parse_master_key(MASTER_HEX).unwrap()).unwrap())
}

pub fn parse_master() -> smbank_core::seal::SealKey {
    parse_master_key(MASTER_HEX).unwrap()
}
