//! Signcryption in the style of Zheng's SDSS1, a sign-then-encrypt
//! baseline, and an instrumented cost comparison of the two.
//!
//! Sender `a` with key `x_a`, recipient `b` with public `y_b = g^x_b`:
//!
//! ```text
//! v <- [1, q-1]
//! k = H(y_b^v);  k1 = k[0..16];  k2 = k[16..32]
//! c = AES-CTR(k1, m);  r = HMAC(k2, m);  s = v / (r + x_a) mod q
//! ```
//!
//! and the recipient recovers `k = H((y_a * g^r)^(s * x_b))`.

mod baseline;
mod cost;
mod group;
mod scheme;

pub use baseline::{decrypt_then_verify_baseline, sign_then_encrypt_baseline};
pub use cost::{baseline_overhead_formula, cost_report, signcrypt_overhead_formula, CostReport};
pub use group::{is_probable_prime, ExpCounter, GroupError, GroupKind, GroupParams};
pub use scheme::{signcrypt, unsigncrypt, SigncryptedPayload, R_LEN};

pub(crate) use baseline::{decrypt_then_verify_counted, sign_then_encrypt_counted};
pub(crate) use scheme::{signcrypt_counted, unsigncrypt_counted};

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use rand_core::RngCore;

use crate::entropy::EntropyError;
use crate::terms::Identity;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SigncryptError {
    #[error("keys belong to different group parameters")]
    Param,
    #[error("payload failed authentication")]
    Authenticity,
    #[error("malformed payload encoding")]
    Decode,
    #[error("message must not be empty")]
    EmptyMessage,
    #[error("scalar or element out of range")]
    Range,
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

/// Secret exponent `x` in `[1, q-1]`.
#[derive(Clone)]
pub struct PrivateKey {
    x: BigUint,
    owner: Identity,
    params: Arc<GroupParams>,
}

/// `y = g^x mod p`.
#[derive(Clone, PartialEq, Eq)]
pub struct PublicKey {
    y: BigUint,
    owner: Identity,
    params: Arc<GroupParams>,
}

impl PrivateKey {
    pub fn from_scalar(
        params: Arc<GroupParams>,
        x: BigUint,
        owner: Identity,
    ) -> Result<Self, SigncryptError> {
        if x == BigUint::from(0u8) || &x >= params.q() {
            return Err(SigncryptError::Range);
        }
        Ok(Self { x, owner, params })
    }

    /// Parses the fixed-width big-endian scalar encoding.
    pub fn from_bytes(
        params: Arc<GroupParams>,
        bytes: &[u8],
        owner: Identity,
    ) -> Result<Self, SigncryptError> {
        Self::from_scalar(params, BigUint::from_bytes_be(bytes), owner)
    }

    pub fn public_key(&self) -> PublicKey {
        let y = self.params.pow(self.params.g(), &self.x, &mut ExpCounter::default());
        PublicKey { y, owner: self.owner.clone(), params: self.params.clone() }
    }

    pub fn owner(&self) -> &Identity {
        &self.owner
    }

    pub fn params(&self) -> &Arc<GroupParams> {
        &self.params
    }

    pub(crate) fn scalar(&self) -> &BigUint {
        &self.x
    }

    /// Fixed-width scalar bytes. Callers own the secrecy of the result.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.params.encode_scalar(&self.x)
    }
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PrivateKey({}, ..)", self.owner.display_name())
    }
}

impl PublicKey {
    /// Validates subgroup membership.
    pub fn new(params: Arc<GroupParams>, y: BigUint, owner: Identity) -> Result<Self, SigncryptError> {
        if !params.is_subgroup_element(&y) {
            return Err(SigncryptError::Range);
        }
        Ok(Self { y, owner, params })
    }

    pub fn from_bytes(
        params: Arc<GroupParams>,
        bytes: &[u8],
        owner: Identity,
    ) -> Result<Self, SigncryptError> {
        if bytes.len() != params.element_len() {
            return Err(SigncryptError::Decode);
        }
        Self::new(params, BigUint::from_bytes_be(bytes), owner)
    }

    pub fn y(&self) -> &BigUint {
        &self.y
    }

    pub fn owner(&self) -> &Identity {
        &self.owner
    }

    pub fn params(&self) -> &Arc<GroupParams> {
        &self.params
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.params.encode_element(&self.y)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({}, {:x})", self.owner.display_name(), self.y)
    }
}

pub(crate) fn same_params(a: &Arc<GroupParams>, b: &Arc<GroupParams>) -> Result<(), SigncryptError> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(SigncryptError::Param)
    }
}

/// `x` uniform in `[1, q-1]`, `y = g^x`.
pub fn keygen<R: RngCore + ?Sized>(
    params: &Arc<GroupParams>,
    owner: Identity,
    rng: &mut R,
) -> Result<(PrivateKey, PublicKey), EntropyError> {
    let x = params.random_scalar(rng)?;
    let sk = PrivateKey { x, owner, params: params.clone() };
    let pk = sk.public_key();
    Ok((sk, pk))
}
