//! The bank's long-term key file and the emulated card directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{CryptoRng, RngCore};
use smbank_core::seal::{self, SealKey};
use smbank_core::signcrypt::{keygen, GroupKind, GroupParams, PrivateKey};
use smbank_core::smartcard::{CardState, PersistError};
use smbank_core::terms::Identity;
use zeroize::Zeroize;

const BANK_MAGIC: &[u8; 4] = b"SMBK";
const BANK_VERSION: u8 = 1;
const BANK_SEAL_LABEL: &[u8] = b"service/bank-key";
pub const BANK_NAME: &str = "bank";

#[derive(Debug, thiserror::Error)]
pub enum KeyFileError {
    #[error("key file io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a bank key file")]
    Format,
    #[error("bank key file is for the {found} group, config says {want}")]
    Group { found: &'static str, want: &'static str },
    #[error("bank key does not open under the master key")]
    WrongMasterKey,
    #[error("card file: {0}")]
    Card(#[from] PersistError),
    #[error("no card {0}")]
    NoCard(String),
}

pub fn named_group(kind: GroupKind) -> Arc<GroupParams> {
    Arc::new(GroupParams::named(kind).expect("config only names built-in groups"))
}

/// `"SMBK" version group_id sealed(sk)`; the seal key is derived from the
/// master key.
pub fn save_bank_key<R: RngCore + CryptoRng>(
    path: &Path,
    sk: &PrivateKey,
    master: &SealKey,
    rng: &mut R,
) -> Result<(), KeyFileError> {
    let mut raw = sk.to_bytes();
    let sealed = seal::seal(&master.derive(BANK_SEAL_LABEL, b""), rng, &raw).map_err(|_| KeyFileError::Format)?;
    raw.zeroize();
    let mut out = Vec::with_capacity(6 + sealed.len());
    out.extend_from_slice(BANK_MAGIC);
    out.push(BANK_VERSION);
    out.push(sk.params().kind().id());
    out.extend_from_slice(&sealed);
    write_atomically(path, &out)?;
    Ok(())
}

pub fn load_bank_key(path: &Path, params: &Arc<GroupParams>, master: &SealKey) -> Result<PrivateKey, KeyFileError> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 6 || &bytes[..4] != BANK_MAGIC || bytes[4] != BANK_VERSION {
        return Err(KeyFileError::Format);
    }
    let found = GroupKind::from_id(bytes[5]).ok_or(KeyFileError::Format)?;
    if found != params.kind() {
        return Err(KeyFileError::Group { found: found.name(), want: params.kind().name() });
    }
    let mut raw =
        seal::open(&master.derive(BANK_SEAL_LABEL, b""), &bytes[6..]).map_err(|_| KeyFileError::WrongMasterKey)?;
    let owner = Identity::bank(BANK_NAME).expect("valid name");
    let sk = PrivateKey::from_bytes(params.clone(), &raw, owner).map_err(|_| KeyFileError::Format);
    raw.zeroize();
    sk
}

/// Loads the bank key, generating and saving a fresh one on first start.
pub fn load_or_create_bank_key<R: RngCore + CryptoRng>(
    path: &Path,
    params: &Arc<GroupParams>,
    master: &SealKey,
    rng: &mut R,
) -> Result<PrivateKey, KeyFileError> {
    if path.exists() {
        return load_bank_key(path, params, master);
    }
    let (sk, _) = keygen(params, Identity::bank(BANK_NAME).expect("valid name"), rng)
        .map_err(|_| KeyFileError::Format)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_bank_key(path, &sk, master, rng)?;
    tracing::info!(path = %path.display(), "generated bank key");
    Ok(sk)
}

fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// Card files named `<hex card id>.card`.
#[derive(Debug, Clone)]
pub struct CardDir {
    dir: PathBuf,
}

impl CardDir {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// Card ids are 16 hex digits; anything else never touches the filesystem.
    pub fn path_for(&self, id: &str) -> Option<PathBuf> {
        (id.len() == 16 && id.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()))
            .then(|| self.dir.join(format!("{id}.card")))
    }

    pub fn save(&self, card: &CardState) -> Result<String, KeyFileError> {
        std::fs::create_dir_all(&self.dir)?;
        let id = hex::encode(card.card_id());
        let path = self.path_for(&id).expect("hex ids are valid");
        save_card(&path, card)?;
        Ok(id)
    }

    pub fn load(&self, id: &str) -> Result<CardState, KeyFileError> {
        let path = self.path_for(id).ok_or_else(|| KeyFileError::NoCard(id.into()))?;
        if !path.exists() {
            return Err(KeyFileError::NoCard(id.into()));
        }
        load_card(&path)
    }
}

pub fn save_card(path: &Path, card: &CardState) -> Result<(), KeyFileError> {
    write_atomically(path, &card.to_bytes()?)?;
    Ok(())
}

pub fn load_card(path: &Path) -> Result<CardState, KeyFileError> {
    Ok(CardState::from_bytes(&std::fs::read(path)?)?)
}
