use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::Zero;
use rand_core::RngCore;
use subtle::ConstantTimeEq;
use zeroize::Zeroize;

use super::{same_params, ExpCounter, GroupParams, PrivateKey, PublicKey, SigncryptError};
use crate::seal::{ctr_apply, hmac_sha256};
use crate::terms::hash;

/// Length of the keyed digest `r`.
pub const R_LEN: usize = 32;

/// The `(c, r, s)` triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigncryptedPayload {
    pub c: Vec<u8>,
    pub r: [u8; R_LEN],
    /// Big-endian `s`, fixed to the group's scalar width when produced here.
    pub s: Vec<u8>,
}

impl SigncryptedPayload {
    /// `len(c):u16be  c  r[32]  len(s):u16be  s`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.c.len() + R_LEN + self.s.len());
        out.extend_from_slice(&(self.c.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.c);
        out.extend_from_slice(&self.r);
        out.extend_from_slice(&(self.s.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.s);
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, SigncryptError> {
        let read_len = |b: &[u8], at: usize| -> Result<usize, SigncryptError> {
            b.get(at..at + 2)
                .map(|l| u16::from_be_bytes([l[0], l[1]]) as usize)
                .ok_or(SigncryptError::Decode)
        };
        let c_len = read_len(b, 0)?;
        let c = b.get(2..2 + c_len).ok_or(SigncryptError::Decode)?.to_vec();
        let r_at = 2 + c_len;
        let r: [u8; R_LEN] = b
            .get(r_at..r_at + R_LEN)
            .ok_or(SigncryptError::Decode)?
            .try_into()
            .expect("slice has R_LEN bytes");
        let s_at = r_at + R_LEN;
        let s_len = read_len(b, s_at)?;
        let s = b.get(s_at + 2..s_at + 2 + s_len).ok_or(SigncryptError::Decode)?.to_vec();
        if s_at + 2 + s_len != b.len() {
            return Err(SigncryptError::Decode);
        }
        Ok(Self { c, r, s })
    }

    pub fn wire_len(&self) -> usize {
        4 + self.c.len() + R_LEN + self.s.len()
    }
}

fn split_key(shared: &BigUint, params: &GroupParams) -> ([u8; 16], [u8; 16]) {
    let k = hash(&params.encode_element(shared));
    let mut k1 = [0u8; 16];
    let mut k2 = [0u8; 16];
    k1.copy_from_slice(&k.as_bytes()[..16]);
    k2.copy_from_slice(&k.as_bytes()[16..]);
    (k1, k2)
}

pub fn signcrypt<R: RngCore + ?Sized>(
    sender_sk: &PrivateKey,
    recipient_pk: &PublicKey,
    m: &[u8],
    rng: &mut R,
) -> Result<SigncryptedPayload, SigncryptError> {
    signcrypt_counted(sender_sk, recipient_pk, m, rng, &mut ExpCounter::default())
}

pub(crate) fn signcrypt_counted<R: RngCore + ?Sized>(
    sender_sk: &PrivateKey,
    recipient_pk: &PublicKey,
    m: &[u8],
    rng: &mut R,
    ctr: &mut ExpCounter,
) -> Result<SigncryptedPayload, SigncryptError> {
    same_params(sender_sk.params(), recipient_pk.params())?;
    if m.is_empty() {
        return Err(SigncryptError::EmptyMessage);
    }
    if m.len() > u16::MAX as usize {
        return Err(SigncryptError::Range);
    }
    let params = sender_sk.params();
    loop {
        let v = params.random_scalar(rng)?;
        let shared = params.pow(recipient_pk.y(), &v, ctr);
        let (mut k1, mut k2) = split_key(&shared, params);
        let r = hmac_sha256(&k2, &[m]);
        let r_int = BigUint::from_bytes_be(&r);
        // (r + x) = 0 mod q has no inverse; draw a fresh v.
        let Some(inv) = params.inv_mod_q(&(r_int + sender_sk.scalar())) else {
            k1.zeroize();
            k2.zeroize();
            continue;
        };
        let s = (v * inv) % params.q();
        let mut c = m.to_vec();
        ctr_apply(&k1, &[0u8; 16], &mut c);
        k1.zeroize();
        k2.zeroize();
        return Ok(SigncryptedPayload { c, r, s: params.encode_scalar(&s) });
    }
}

pub fn unsigncrypt(
    recipient_sk: &PrivateKey,
    sender_pk: &PublicKey,
    payload: &SigncryptedPayload,
) -> Result<Vec<u8>, SigncryptError> {
    unsigncrypt_counted(recipient_sk, sender_pk, payload, &mut ExpCounter::default())
}

pub(crate) fn unsigncrypt_counted(
    recipient_sk: &PrivateKey,
    sender_pk: &PublicKey,
    payload: &SigncryptedPayload,
    ctr: &mut ExpCounter,
) -> Result<Vec<u8>, SigncryptError> {
    same_params(recipient_sk.params(), sender_pk.params())?;
    let params = recipient_sk.params();
    let s = BigUint::from_bytes_be(&payload.s);
    // s = 0 would make the shared value 1 for every key.
    if s.is_zero() || &s >= params.q() || payload.s.len() > params.scalar_len() {
        return Err(SigncryptError::Authenticity);
    }
    let r_int = BigUint::from_bytes_be(&payload.r) % params.q();
    let base = params.mul(sender_pk.y(), &params.pow(params.g(), &r_int, ctr));
    let exp = (s * recipient_sk.scalar()) % params.q();
    let shared = params.pow(&base, &exp, ctr);
    let (mut k1, mut k2) = split_key(&shared, params);
    let mut m = payload.c.clone();
    ctr_apply(&k1, &[0u8; 16], &mut m);
    let expected = hmac_sha256(&k2, &[&m]);
    k1.zeroize();
    k2.zeroize();
    if bool::from(expected.ct_eq(&payload.r)) {
        Ok(m)
    } else {
        m.zeroize();
        Err(SigncryptError::Authenticity)
    }
}

#[cfg(test)]
mod tests {
    use super::super::keygen;
    use super::*;
    use crate::terms::Identity;
    use alloc::sync::Arc;
    use proptest::prelude::*;
    use rand::{rngs::StdRng, Rng, SeedableRng};
    use std::collections::HashSet;

    fn parties(params: &Arc<GroupParams>, rng: &mut StdRng) -> (PrivateKey, PublicKey, PrivateKey, PublicKey) {
        let (bank_sk, bank_pk) = keygen(params, Identity::bank("bank").unwrap(), rng).unwrap();
        let (user_sk, user_pk) = keygen(params, Identity::user("alice").unwrap(), rng).unwrap();
        (bank_sk, bank_pk, user_sk, user_pk)
    }

    #[test]
    fn roundtrip_toy_and_default() {
        let mut rng = StdRng::seed_from_u64(11);
        for (params, trials) in [(GroupParams::toy(), 1000), (GroupParams::default_group(), 1000)] {
            let params = Arc::new(params);
            for _ in 0..trials {
                let (bank_sk, bank_pk, user_sk, user_pk) = parties(&params, &mut rng);
                let len = rng.gen_range(1..64);
                let m: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
                let p = signcrypt(&bank_sk, &user_pk, &m, &mut rng).unwrap();
                assert_eq!(unsigncrypt(&user_sk, &bank_pk, &p).unwrap(), m);
                assert_eq!(SigncryptedPayload::from_bytes(&p.to_bytes()).unwrap(), p);
            }
        }
    }

    #[test]
    fn fresh_randomness_gives_distinct_payloads() {
        let params = Arc::new(GroupParams::default_group());
        let mut rng = StdRng::seed_from_u64(12);
        let (bank_sk, _, _, user_pk) = parties(&params, &mut rng);
        let mut seen = HashSet::new();
        for _ in 0..1000 {
            assert!(seen.insert(signcrypt(&bank_sk, &user_pk, b"same message", &mut rng).unwrap().to_bytes()));
        }
    }

    #[test]
    fn bit_flips_are_rejected() {
        let params = Arc::new(GroupParams::default_group());
        let mut rng = StdRng::seed_from_u64(13);
        let (bank_sk, bank_pk, user_sk, user_pk) = parties(&params, &mut rng);
        let p = signcrypt(&bank_sk, &user_pk, &[0x42; 16], &mut rng).unwrap();
        let bytes = p.to_bytes();
        // Every bit of c, r and s; the length prefixes are covered by decode checks.
        let c_bits = (2..2 + p.c.len()).flat_map(|i| (0..8).map(move |b| (i, b)));
        let r_bits = (2 + p.c.len()..2 + p.c.len() + R_LEN).flat_map(|i| (0..8).map(move |b| (i, b)));
        let s_at = 4 + p.c.len() + R_LEN;
        let s_bits = (s_at..bytes.len()).flat_map(|i| (0..8).map(move |b| (i, b)));
        let mut flips = 0;
        for (i, bit) in c_bits.chain(r_bits).chain(s_bits) {
            let mut bad = bytes.clone();
            bad[i] ^= 1 << bit;
            let parsed = SigncryptedPayload::from_bytes(&bad).unwrap();
            assert_eq!(unsigncrypt(&user_sk, &bank_pk, &parsed), Err(SigncryptError::Authenticity));
            flips += 1;
        }
        assert!(flips >= 100);
    }

    #[test]
    fn rogue_sender_is_rejected() {
        let params = Arc::new(GroupParams::default_group());
        let mut rng = StdRng::seed_from_u64(14);
        let (_, bank_pk, user_sk, user_pk) = parties(&params, &mut rng);
        let (rogue_sk, _) = keygen(&params, Identity::bank("bank").unwrap(), &mut rng).unwrap();
        let p = signcrypt(&rogue_sk, &user_pk, b"nonce", &mut rng).unwrap();
        assert_eq!(unsigncrypt(&user_sk, &bank_pk, &p), Err(SigncryptError::Authenticity));
    }

    #[test]
    fn zero_s_is_not_a_universal_forgery() {
        let params = Arc::new(GroupParams::default_group());
        let mut rng = StdRng::seed_from_u64(15);
        let (_, bank_pk, user_sk, _) = parties(&params, &mut rng);
        // With s = 0 the shared value would be 1, computable by anyone.
        let (k1, k2) = split_key(&BigUint::from(1u8), &params);
        let m = b"forged nonce";
        let mut c = m.to_vec();
        ctr_apply(&k1, &[0; 16], &mut c);
        let forged = SigncryptedPayload { c, r: hmac_sha256(&k2, &[m]), s: params.encode_scalar(&BigUint::zero()) };
        assert_eq!(unsigncrypt(&user_sk, &bank_pk, &forged), Err(SigncryptError::Authenticity));
    }

    #[test]
    fn random_forgeries_on_toy_group_fail() {
        let params = Arc::new(GroupParams::toy());
        let mut rng = StdRng::seed_from_u64(16);
        let (_, bank_pk, user_sk, _) = parties(&params, &mut rng);
        let mut accepted = 0;
        for _ in 0..10_000 {
            let forged = SigncryptedPayload {
                c: (0..16).map(|_| rng.gen()).collect(),
                r: rng.gen(),
                s: alloc::vec![rng.gen_range(0..11u8)],
            };
            if unsigncrypt(&user_sk, &bank_pk, &forged).is_ok() {
                accepted += 1;
            }
        }
        assert_eq!(accepted, 0);
    }

    #[test]
    fn parameter_mismatch_and_empty_message() {
        let mut rng = StdRng::seed_from_u64(17);
        let toy = Arc::new(GroupParams::toy());
        let big = Arc::new(GroupParams::default_group());
        let (sk, _, _, _) = parties(&toy, &mut rng);
        let (_, _, _, other_pk) = parties(&big, &mut rng);
        assert_eq!(signcrypt(&sk, &other_pk, b"m", &mut rng), Err(SigncryptError::Param));
        let (sk, _, _, pk) = parties(&toy, &mut rng);
        assert_eq!(signcrypt(&sk, &pk, b"", &mut rng), Err(SigncryptError::EmptyMessage));
    }

    #[test]
    fn exponentiation_counts() {
        let params = Arc::new(GroupParams::toy());
        let mut rng = StdRng::seed_from_u64(18);
        let (bank_sk, bank_pk, user_sk, user_pk) = parties(&params, &mut rng);
        let mut send = ExpCounter::default();
        let p = signcrypt_counted(&bank_sk, &user_pk, b"abc", &mut rng, &mut send).unwrap();
        let mut recv = ExpCounter::default();
        unsigncrypt_counted(&user_sk, &bank_pk, &p, &mut recv).unwrap();
        // One y^v per attempt; retries only when (r + x) = 0 mod q.
        assert!(send.0 >= 1);
        assert_eq!(recv.0, 2);
    }

    #[test]
    fn malformed_encodings() {
        assert_eq!(SigncryptedPayload::from_bytes(&[]), Err(SigncryptError::Decode));
        assert_eq!(SigncryptedPayload::from_bytes(&[0, 5, 1]), Err(SigncryptError::Decode));
        let p = SigncryptedPayload { c: alloc::vec![1, 2], r: [3; 32], s: alloc::vec![4] };
        let mut b = p.to_bytes();
        b.push(0);
        assert_eq!(SigncryptedPayload::from_bytes(&b), Err(SigncryptError::Decode));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn encoding_roundtrip(c in prop::collection::vec(any::<u8>(), 0..80), r in any::<[u8; 32]>(),
                              s in prop::collection::vec(any::<u8>(), 0..40)) {
            let p = SigncryptedPayload { c, r, s };
            prop_assert_eq!(SigncryptedPayload::from_bytes(&p.to_bytes()).unwrap(), p);
        }
    }
}
