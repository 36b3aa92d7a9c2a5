//! Schnorr signature followed by hashed-ElGamal encryption. Exists only as
//! the comparison point for signcryption costs.
//!
//! ```text
//! sign:    R = g^k; e = H(R || m); s = k - x_a*e mod q
//! encrypt: T = g^t; K = H(y_b^t); ct = AES-CTR(K[0..16], m || e || s)
//! blob:    len(T):u16be  T  len(ct):u16be  ct
//! ```

use alloc::vec::Vec;

use num_bigint::BigUint;
use rand_core::RngCore;
use sha2::{Digest as _, Sha256};
use subtle::ConstantTimeEq;

use super::{same_params, ExpCounter, GroupParams, PrivateKey, PublicKey, SigncryptError};
use crate::seal::ctr_apply;
use crate::terms::hash;

const E_LEN: usize = 32;

fn challenge(params: &GroupParams, commitment: &BigUint, m: &[u8]) -> [u8; E_LEN] {
    let mut h = Sha256::new();
    h.update(params.encode_element(commitment));
    h.update(m);
    h.finalize().into()
}

fn stream_key(params: &GroupParams, shared: &BigUint) -> [u8; 16] {
    let k = hash(&params.encode_element(shared));
    let mut out = [0u8; 16];
    out.copy_from_slice(&k.as_bytes()[..16]);
    out
}

pub fn sign_then_encrypt_baseline<R: RngCore + ?Sized>(
    sender_sk: &PrivateKey,
    recipient_pk: &PublicKey,
    m: &[u8],
    rng: &mut R,
) -> Result<Vec<u8>, SigncryptError> {
    sign_then_encrypt_counted(sender_sk, recipient_pk, m, rng, &mut ExpCounter::default())
}

pub(crate) fn sign_then_encrypt_counted<R: RngCore + ?Sized>(
    sender_sk: &PrivateKey,
    recipient_pk: &PublicKey,
    m: &[u8],
    rng: &mut R,
    ctr: &mut ExpCounter,
) -> Result<Vec<u8>, SigncryptError> {
    same_params(sender_sk.params(), recipient_pk.params())?;
    let params = sender_sk.params();
    let q = params.q();

    let k = params.random_scalar(rng)?;
    let commitment = params.pow(params.g(), &k, ctr);
    let e = challenge(params, &commitment, m);
    let e_int = BigUint::from_bytes_be(&e) % q;
    let s = (k + q - (sender_sk.scalar() * e_int) % q) % q;

    let t = params.random_scalar(rng)?;
    let ephemeral = params.pow(params.g(), &t, ctr);
    let key = stream_key(params, &params.pow(recipient_pk.y(), &t, ctr));

    let mut body = Vec::with_capacity(m.len() + E_LEN + params.scalar_len());
    body.extend_from_slice(m);
    body.extend_from_slice(&e);
    body.extend_from_slice(&params.encode_scalar(&s));
    ctr_apply(&key, &[0u8; 16], &mut body);
    if body.len() > u16::MAX as usize {
        return Err(SigncryptError::Range);
    }

    let t_bytes = params.encode_element(&ephemeral);
    let mut blob = Vec::with_capacity(4 + t_bytes.len() + body.len());
    blob.extend_from_slice(&(t_bytes.len() as u16).to_be_bytes());
    blob.extend_from_slice(&t_bytes);
    blob.extend_from_slice(&(body.len() as u16).to_be_bytes());
    blob.extend_from_slice(&body);
    Ok(blob)
}

pub fn decrypt_then_verify_baseline(
    recipient_sk: &PrivateKey,
    sender_pk: &PublicKey,
    blob: &[u8],
) -> Result<Vec<u8>, SigncryptError> {
    decrypt_then_verify_counted(recipient_sk, sender_pk, blob, &mut ExpCounter::default())
}

pub(crate) fn decrypt_then_verify_counted(
    recipient_sk: &PrivateKey,
    sender_pk: &PublicKey,
    blob: &[u8],
    ctr: &mut ExpCounter,
) -> Result<Vec<u8>, SigncryptError> {
    same_params(recipient_sk.params(), sender_pk.params())?;
    let params = recipient_sk.params();
    let q = params.q();

    let len_at = |at: usize| -> Result<usize, SigncryptError> {
        blob.get(at..at + 2)
            .map(|l| u16::from_be_bytes([l[0], l[1]]) as usize)
            .ok_or(SigncryptError::Decode)
    };
    let t_len = len_at(0)?;
    let t_bytes = blob.get(2..2 + t_len).ok_or(SigncryptError::Decode)?;
    let body_len = len_at(2 + t_len)?;
    let body = blob.get(4 + t_len..4 + t_len + body_len).ok_or(SigncryptError::Decode)?;
    if 4 + t_len + body_len != blob.len() || body_len < E_LEN + params.scalar_len() {
        return Err(SigncryptError::Decode);
    }
    let ephemeral = BigUint::from_bytes_be(t_bytes);
    if t_len != params.element_len() || ephemeral <= BigUint::from(1u8) || &ephemeral >= params.p() {
        return Err(SigncryptError::Authenticity);
    }

    let key = stream_key(params, &params.pow(&ephemeral, recipient_sk.scalar(), ctr));
    let mut body = body.to_vec();
    ctr_apply(&key, &[0u8; 16], &mut body);
    let m_len = body.len() - E_LEN - params.scalar_len();
    let (m, sig) = body.split_at(m_len);
    let (e, s) = sig.split_at(E_LEN);
    let s = BigUint::from_bytes_be(s);
    if &s >= q {
        return Err(SigncryptError::Authenticity);
    }
    let e_int = BigUint::from_bytes_be(e) % q;
    let commitment = params.mul(
        &params.pow(params.g(), &s, ctr),
        &params.pow(sender_pk.y(), &e_int, ctr),
    );
    if bool::from(challenge(params, &commitment, m).ct_eq(e)) {
        Ok(m.to_vec())
    } else {
        Err(SigncryptError::Authenticity)
    }
}
