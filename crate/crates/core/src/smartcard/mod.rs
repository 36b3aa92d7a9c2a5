//! Emulated contactless smartcard.
//!
//! The card holds the user's private key sealed under a key derived from the
//! PIN, and exposes three commands: verify the PIN, "tap" to unsigncrypt a
//! challenge, and read status. Three consecutive wrong PINs lock the card
//! until it is personalized again. Key bytes never leave the card boundary.

mod frame;
mod persist;

pub use frame::{command, decode_command, decode_reply, encode_command, encode_reply, status, FramedLink};
pub use persist::PersistError;

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;
use subtle::ConstantTimeEq;
use zeroize::Zeroize;

use crate::entropy::{self, EntropyError};
use crate::seal::{self, hmac_sha256, pbkdf2_sha256, SealKey};
use crate::signcrypt::{unsigncrypt, PrivateKey, PublicKey, SigncryptedPayload};
use crate::terms::{Identity, Nonce};

/// Consecutive wrong PINs before the card locks.
pub const MAX_PIN_RETRIES: u8 = 3;
/// Lower bound on PIN key-derivation iterations.
pub const MIN_KDF_ITERATIONS: u32 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CardError {
    #[error("PIN must be 4-8 digits")]
    PinFormat,
    #[error("no PIN-authenticated session")]
    PinRequired,
    #[error("malformed command or payload")]
    Decode,
    #[error("key derivation needs at least 10000 iterations")]
    WeakKdf,
    #[error("card storage is corrupt")]
    Storage,
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

#[derive(Clone, PartialEq, Eq)]
pub enum CardCommand {
    VerifyPin(Vec<u8>),
    TapUnsigncrypt(Vec<u8>),
    Status,
}

impl fmt::Debug for CardCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CardCommand::VerifyPin(_) => f.write_str("VerifyPin(..)"),
            CardCommand::TapUnsigncrypt(p) => write!(f, "TapUnsigncrypt({} bytes)", p.len()),
            CardCommand::Status => f.write_str("Status"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CardReply {
    Ok,
    PinAccepted(u8),
    PinRejected(u8),
    Locked,
    /// The recovered challenge nonce `R_c`.
    Challenge(Nonce),
    /// The payload did not come from the bank's key.
    AuthFail,
    StatusInfo { locked: bool, remaining: u8 },
}

/// Anything that carries card commands: the card itself, a framed loopback,
/// or a network endpoint.
pub trait CardLink {
    fn transmit(&mut self, cmd: &CardCommand) -> Result<CardReply, CardError>;
}

fn validate_pin(pin: &[u8]) -> Result<(), CardError> {
    if (4..=8).contains(&pin.len()) && pin.iter().all(u8::is_ascii_digit) {
        Ok(())
    } else {
        Err(CardError::PinFormat)
    }
}

struct PinKeys {
    verifier: [u8; 32],
    seal: SealKey,
}

fn pin_keys(pin: &[u8], salt: &[u8; 16], iterations: u32) -> PinKeys {
    let mut master = pbkdf2_sha256(pin, salt, iterations);
    let verifier = hmac_sha256(&master, &[b"card/pin-verifier"]);
    let seal = SealKey::new(hmac_sha256(&master, &[b"card/pin-seal"]));
    master.zeroize();
    PinKeys { verifier, seal }
}

/// Persistent card contents plus the volatile PIN session.
pub struct CardState {
    card_id: [u8; 8],
    holder: Identity,
    sealed_sk: Vec<u8>,
    pin_verifier: [u8; 32],
    salt: [u8; 16],
    retry_counter: u8,
    locked: bool,
    bank_pk: PublicKey,
    kdf_iterations: u32,
    // Not persisted.
    session: Option<SealKey>,
    pin_successes: u64,
    taps: u64,
}

impl fmt::Debug for CardState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CardState")
            .field("card_id", &self.card_id)
            .field("retry_counter", &self.retry_counter)
            .field("locked", &self.locked)
            .finish_non_exhaustive()
    }
}

/// Personalizes a fresh card with the default KDF cost.
pub fn personalize<R: RngCore + ?Sized>(
    user_sk: &PrivateKey,
    bank_pk: &PublicKey,
    pin: &[u8],
    rng: &mut R,
) -> Result<CardState, CardError> {
    personalize_with_iterations(user_sk, bank_pk, pin, MIN_KDF_ITERATIONS, rng)
}

pub fn personalize_with_iterations<R: RngCore + ?Sized>(
    user_sk: &PrivateKey,
    bank_pk: &PublicKey,
    pin: &[u8],
    kdf_iterations: u32,
    rng: &mut R,
) -> Result<CardState, CardError> {
    validate_pin(pin)?;
    if kdf_iterations < MIN_KDF_ITERATIONS {
        return Err(CardError::WeakKdf);
    }
    if user_sk.params() != bank_pk.params() {
        return Err(CardError::Decode);
    }
    let mut card_id = [0u8; 8];
    let mut salt = [0u8; 16];
    entropy::fill(rng, &mut card_id)?;
    entropy::fill(rng, &mut salt)?;
    let keys = pin_keys(pin, &salt, kdf_iterations);
    let mut sk_bytes = user_sk.to_bytes();
    let sealed_sk = seal::seal(&keys.seal, rng, &sk_bytes)?;
    sk_bytes.zeroize();
    Ok(CardState {
        card_id,
        holder: user_sk.owner().clone(),
        sealed_sk,
        pin_verifier: keys.verifier,
        salt,
        retry_counter: MAX_PIN_RETRIES,
        locked: false,
        bank_pk: bank_pk.clone(),
        kdf_iterations,
        session: None,
        pin_successes: 0,
        taps: 0,
    })
}

impl CardState {
    pub fn card_id(&self) -> [u8; 8] {
        self.card_id
    }

    pub fn holder(&self) -> &Identity {
        &self.holder
    }

    pub fn is_locked(&self) -> bool {
        self.locked
    }

    pub fn remaining_tries(&self) -> u8 {
        self.retry_counter
    }

    pub fn bank_pk(&self) -> &PublicKey {
        &self.bank_pk
    }

    pub fn has_pin_session(&self) -> bool {
        self.session.is_some()
    }

    /// Successful PIN verifications since load.
    pub fn pin_successes(&self) -> u64 {
        self.pin_successes
    }

    /// Taps that consumed a PIN session since load.
    pub fn taps(&self) -> u64 {
        self.taps
    }

    /// Sealed key bytes, exposed for storage-level audits only.
    pub fn sealed_key_blob(&self) -> &[u8] {
        &self.sealed_sk
    }

    pub fn execute(&mut self, cmd: &CardCommand) -> Result<CardReply, CardError> {
        if self.locked {
            return Ok(CardReply::Locked);
        }
        match cmd {
            CardCommand::VerifyPin(pin) => Ok(self.verify_pin(pin)),
            CardCommand::TapUnsigncrypt(payload) => self.tap_unsigncrypt(payload),
            CardCommand::Status => Ok(CardReply::StatusInfo {
                locked: self.locked,
                remaining: self.retry_counter,
            }),
        }
    }

    pub fn verify_pin(&mut self, pin: &[u8]) -> CardReply {
        if self.locked {
            return CardReply::Locked;
        }
        self.session = None;
        let keys = validate_pin(pin).ok().map(|_| pin_keys(pin, &self.salt, self.kdf_iterations));
        let matches = keys
            .as_ref()
            .is_some_and(|k| bool::from(k.verifier.ct_eq(&self.pin_verifier)));
        match keys {
            Some(k) if matches => {
                self.retry_counter = MAX_PIN_RETRIES;
                self.session = Some(k.seal);
                self.pin_successes += 1;
                CardReply::PinAccepted(self.retry_counter)
            }
            _ => {
                self.retry_counter = self.retry_counter.saturating_sub(1);
                if self.retry_counter == 0 {
                    self.locked = true;
                    CardReply::Locked
                } else {
                    CardReply::PinRejected(self.retry_counter)
                }
            }
        }
    }

    pub fn tap_unsigncrypt(&mut self, payload: &[u8]) -> Result<CardReply, CardError> {
        if self.locked {
            return Ok(CardReply::Locked);
        }
        let key = self.session.take().ok_or(CardError::PinRequired)?;
        self.taps += 1;
        let payload = SigncryptedPayload::from_bytes(payload).map_err(|_| CardError::Decode)?;
        let mut sk_bytes = seal::open(&key, &self.sealed_sk).map_err(|_| CardError::Storage)?;
        let sk = PrivateKey::from_bytes(Arc::clone(self.bank_pk.params()), &sk_bytes, self.holder.clone())
            .map_err(|_| CardError::Storage);
        sk_bytes.zeroize();
        let sk = sk?;
        match unsigncrypt(&sk, &self.bank_pk, &payload) {
            Ok(mut m) => {
                let nonce = Nonce::from_slice(&m).map_err(|_| CardError::Decode);
                m.zeroize();
                Ok(CardReply::Challenge(nonce?))
            }
            Err(_) => Ok(CardReply::AuthFail),
        }
    }

    /// Handles one framed command and returns the framed reply.
    pub fn handle_frame(&mut self, frame: &[u8]) -> Vec<u8> {
        let reply = decode_command(frame).and_then(|cmd| self.execute(&cmd));
        encode_reply(&reply)
    }
}

impl CardLink for CardState {
    fn transmit(&mut self, cmd: &CardCommand) -> Result<CardReply, CardError> {
        self.execute(cmd)
    }
}

#[cfg(test)]
mod tests;
