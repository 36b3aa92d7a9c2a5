//! Instrumented comparison of signcryption against sign-then-encrypt.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand_core::RngCore;

use super::{
    decrypt_then_verify_counted, keygen, sign_then_encrypt_counted, signcrypt_counted,
    unsigncrypt_counted, ExpCounter, GroupParams, SigncryptError, R_LEN,
};
use crate::entropy;
use crate::terms::Identity;

/// Totals over `trials` runs of each scheme on the same messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostReport {
    pub trials: u32,
    pub message_len: usize,
    pub signcrypt_sender_exps: u64,
    pub signcrypt_receiver_exps: u64,
    pub signcrypt_bytes: u64,
    pub baseline_sender_exps: u64,
    pub baseline_receiver_exps: u64,
    pub baseline_bytes: u64,
    /// Signcryption used fewer exponentiations and fewer bytes in every run.
    pub cheaper_every_run: bool,
}

impl CostReport {
    pub fn signcrypt_total_exps(&self) -> u64 {
        self.signcrypt_sender_exps + self.signcrypt_receiver_exps
    }

    pub fn baseline_total_exps(&self) -> u64 {
        self.baseline_sender_exps + self.baseline_receiver_exps
    }

    /// Signcryption exponentiations over baseline exponentiations.
    pub fn exp_ratio(&self) -> f64 {
        self.signcrypt_total_exps() as f64 / self.baseline_total_exps() as f64
    }

    pub fn byte_ratio(&self) -> f64 {
        self.signcrypt_bytes as f64 / self.baseline_bytes as f64
    }

    /// Per-run bytes beyond the message itself.
    pub fn signcrypt_overhead(&self) -> u64 {
        self.signcrypt_bytes / self.trials as u64 - self.message_len as u64
    }

    pub fn baseline_overhead(&self) -> u64 {
        self.baseline_bytes / self.trials as u64 - self.message_len as u64
    }
}

/// Predicted payload overhead `|r| + |s|` and framing, without running.
pub fn signcrypt_overhead_formula(params: &GroupParams) -> usize {
    R_LEN + params.scalar_len() + 4
}

/// Predicted baseline overhead: signature, ephemeral element and framing.
pub fn baseline_overhead_formula(params: &GroupParams) -> usize {
    32 + params.scalar_len() + params.element_len() + 4
}

pub fn cost_report<R: RngCore + ?Sized>(
    params: &Arc<GroupParams>,
    message_len: usize,
    trials: u32,
    rng: &mut R,
) -> Result<CostReport, SigncryptError> {
    let trials = trials.max(1);
    let message_len = message_len.max(1);
    let (bank_sk, bank_pk) = keygen(params, Identity::bank("bank").expect("valid name"), rng)?;
    let (user_sk, user_pk) = keygen(params, Identity::user("user").expect("valid name"), rng)?;

    let mut report = CostReport {
        trials,
        message_len,
        signcrypt_sender_exps: 0,
        signcrypt_receiver_exps: 0,
        signcrypt_bytes: 0,
        baseline_sender_exps: 0,
        baseline_receiver_exps: 0,
        baseline_bytes: 0,
        cheaper_every_run: true,
    };
    let mut m: Vec<u8> = alloc::vec![0u8; message_len];
    for _ in 0..trials {
        entropy::fill(rng, &mut m)?;

        let (mut ss, mut sr) = (ExpCounter::default(), ExpCounter::default());
        let payload = signcrypt_counted(&bank_sk, &user_pk, &m, rng, &mut ss)?;
        let out = unsigncrypt_counted(&user_sk, &bank_pk, &payload, &mut sr)?;
        debug_assert_eq!(out, m);

        let (mut bs, mut br) = (ExpCounter::default(), ExpCounter::default());
        let blob = sign_then_encrypt_counted(&bank_sk, &user_pk, &m, rng, &mut bs)?;
        decrypt_then_verify_counted(&user_sk, &bank_pk, &blob, &mut br)?;

        report.signcrypt_sender_exps += ss.0 as u64;
        report.signcrypt_receiver_exps += sr.0 as u64;
        report.signcrypt_bytes += payload.wire_len() as u64;
        report.baseline_sender_exps += bs.0 as u64;
        report.baseline_receiver_exps += br.0 as u64;
        report.baseline_bytes += blob.len() as u64;
        if ss.0 + sr.0 >= bs.0 + br.0 || payload.wire_len() >= blob.len() {
            report.cheaper_every_run = false;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{rngs::StdRng, SeedableRng};

    #[test]
    fn default_group_report() {
        let params = Arc::new(GroupParams::default_group());
        let r = cost_report(&params, 16, 100, &mut StdRng::seed_from_u64(31)).unwrap();
        // (r + x) = 0 mod q has probability ~2^-256 on the default group.
        assert_eq!(r.signcrypt_sender_exps, 100);
        assert_eq!(r.signcrypt_receiver_exps, 200);
        assert_eq!(r.baseline_sender_exps, 300);
        assert_eq!(r.baseline_receiver_exps, 300);
        assert!(r.exp_ratio() <= 0.6);
        assert!(r.cheaper_every_run);
        assert_eq!(r.signcrypt_overhead() as usize, signcrypt_overhead_formula(&params));
        assert_eq!(r.baseline_overhead() as usize, baseline_overhead_formula(&params));
    }

    #[test]
    fn overhead_smaller_for_all_lengths() {
        let params = Arc::new(GroupParams::toy());
        let mut rng = StdRng::seed_from_u64(32);
        for len in [1, 2, 15, 16, 17, 100, 1000] {
            let r = cost_report(&params, len, 5, &mut rng).unwrap();
            assert!(r.signcrypt_bytes < r.baseline_bytes, "len {len}");
        }
        assert!(signcrypt_overhead_formula(&params) < baseline_overhead_formula(&params));
    }
}
