//! Symmetric building blocks: AES-128-CTR, HMAC-SHA256, PBKDF2, and an
//! encrypt-then-MAC seal for secrets at rest.

use alloc::vec::Vec;

use aes::cipher::{KeyIvInit, StreamCipher};
use hmac::{Hmac, Mac};
use rand_core::RngCore;
use sha2::Sha256;
use subtle::ConstantTimeEq;
use zeroize::Zeroize;

use crate::entropy::{self, EntropyError};

type Aes128Ctr = ctr::Ctr128BE<aes::Aes128>;
type HmacSha256 = Hmac<Sha256>;

const SEAL_NONCE_LEN: usize = 16;
const TAG_LEN: usize = 32;

/// Sealed blob was modified or opened with the wrong key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("sealed data failed authentication")]
pub struct SealError;

/// XOR `data` with the AES-128-CTR keystream for `(key, iv)`.
pub fn ctr_apply(key: &[u8; 16], iv: &[u8; 16], data: &mut [u8]) {
    let mut cipher = Aes128Ctr::new(key.into(), iv.into());
    cipher.apply_keystream(data);
}

pub fn hmac_sha256(key: &[u8], parts: &[&[u8]]) -> [u8; 32] {
    let mut mac = HmacSha256::new_from_slice(key).expect("HMAC accepts any key length");
    for p in parts {
        mac.update(p);
    }
    mac.finalize().into_bytes().into()
}

/// PBKDF2-HMAC-SHA256 with a 32-byte output.
pub fn pbkdf2_sha256(secret: &[u8], salt: &[u8], iterations: u32) -> [u8; 32] {
    let mut out = [0u8; 32];
    pbkdf2::pbkdf2_hmac::<Sha256>(secret, salt, iterations, &mut out);
    out
}

/// A 32-byte key for [`seal`] / [`open`].
#[derive(Clone)]
pub struct SealKey([u8; 32]);

impl SealKey {
    pub fn new(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    /// A subkey bound to a label and salt.
    pub fn derive(&self, label: &[u8], salt: &[u8]) -> SealKey {
        SealKey(hmac_sha256(&self.0, &[label, salt]))
    }

    fn subkeys(&self) -> ([u8; 16], [u8; 32]) {
        let enc = hmac_sha256(&self.0, &[b"seal/enc"]);
        let mac = hmac_sha256(&self.0, &[b"seal/mac"]);
        let mut k = [0u8; 16];
        k.copy_from_slice(&enc[..16]);
        (k, mac)
    }
}

impl Drop for SealKey {
    fn drop(&mut self) {
        self.0.zeroize();
    }
}

/// `nonce || AES-CTR(plaintext) || HMAC(nonce || ciphertext)`.
pub fn seal<R: RngCore + ?Sized>(
    key: &SealKey,
    rng: &mut R,
    plaintext: &[u8],
) -> Result<Vec<u8>, EntropyError> {
    let mut nonce = [0u8; SEAL_NONCE_LEN];
    entropy::fill(rng, &mut nonce)?;
    let (mut enc, mut mac) = key.subkeys();
    let mut out = Vec::with_capacity(SEAL_NONCE_LEN + plaintext.len() + TAG_LEN);
    out.extend_from_slice(&nonce);
    out.extend_from_slice(plaintext);
    ctr_apply(&enc, &nonce, &mut out[SEAL_NONCE_LEN..]);
    let tag = hmac_sha256(&mac, &[&out]);
    out.extend_from_slice(&tag);
    enc.zeroize();
    mac.zeroize();
    Ok(out)
}

pub fn open(key: &SealKey, sealed: &[u8]) -> Result<Vec<u8>, SealError> {
    if sealed.len() < SEAL_NONCE_LEN + TAG_LEN {
        return Err(SealError);
    }
    let (body, tag) = sealed.split_at(sealed.len() - TAG_LEN);
    let (mut enc, mut mac) = key.subkeys();
    let expected = hmac_sha256(&mac, &[body]);
    mac.zeroize();
    if !bool::from(expected.ct_eq(tag)) {
        enc.zeroize();
        return Err(SealError);
    }
    let mut iv = [0u8; 16];
    iv.copy_from_slice(&body[..SEAL_NONCE_LEN]);
    let mut pt = body[SEAL_NONCE_LEN..].to_vec();
    ctr_apply(&enc, &iv, &mut pt);
    enc.zeroize();
    Ok(pt)
}
