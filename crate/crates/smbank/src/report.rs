//! Machine-readable output for `check` and `bench`.

use serde::Serialize;
use smbank_core::adversary::symbolic::{replay, CheckerVerdict, Model, Status};
use smbank_core::signcrypt::CostReport;

#[derive(Debug, Serialize)]
pub struct VerdictLine {
    pub model: &'static str,
    pub claim: String,
    pub status: &'static str,
    pub sessions: usize,
    pub depth: usize,
    pub states: usize,
    /// Present only when an attack was found.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_replays: Option<bool>,
}

impl VerdictLine {
    pub fn new(model: &Model, v: &CheckerVerdict) -> Self {
        let (trace, trace_replays) = match &v.status {
            Status::AttackFound(steps) => (
                Some(steps.iter().map(ToString::to_string).collect()),
                Some(replay(model, steps, v.bounds.depth).is_ok()),
            ),
            _ => (None, None),
        };
        VerdictLine {
            model: v.model,
            claim: v.claim.to_string(),
            status: v.status.label(),
            sessions: v.bounds.sessions,
            depth: v.bounds.depth,
            states: v.states,
            trace,
            trace_replays,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain struct serializes")
    }
}

#[derive(Debug, Serialize)]
pub struct BenchSummary<'a> {
    pub group: &'static str,
    pub trials: u32,
    pub message_len: usize,
    pub signcrypt_sender_exps: u64,
    pub signcrypt_receiver_exps: u64,
    pub signcrypt_total_exps: u64,
    pub baseline_total_exps: u64,
    pub exp_ratio: f64,
    pub signcrypt_overhead_bytes: u64,
    pub baseline_overhead_bytes: u64,
    pub byte_ratio: f64,
    pub cheaper_every_run: bool,
    #[serde(skip)]
    pub report: &'a CostReport,
}

impl<'a> BenchSummary<'a> {
    pub fn new(group: &'static str, report: &'a CostReport) -> Self {
        BenchSummary {
            group,
            trials: report.trials,
            message_len: report.message_len,
            signcrypt_sender_exps: report.signcrypt_sender_exps,
            signcrypt_receiver_exps: report.signcrypt_receiver_exps,
            signcrypt_total_exps: report.signcrypt_total_exps(),
            baseline_total_exps: report.baseline_total_exps(),
            exp_ratio: report.exp_ratio(),
            signcrypt_overhead_bytes: report.signcrypt_overhead(),
            baseline_overhead_bytes: report.baseline_overhead(),
            byte_ratio: report.byte_ratio(),
            cheaper_every_run: report.cheaper_every_run,
            report,
        }
    }

    /// Signcryption beats the baseline on total exponentiations and on
    /// per-message overhead. Per-run cheapness is reported but not required:
    /// on the toy group a signcryption occasionally redraws its nonce.
    pub fn holds(&self) -> bool {
        self.signcrypt_total_exps < self.baseline_total_exps
            && self.signcrypt_overhead_bytes < self.baseline_overhead_bytes
    }

    pub fn render(&self) -> String {
        let r = self.report;
        format!(
            "group {group}, {trials} trials, {len}-byte messages\n\
             exponentiations  signcrypt {ss}+{sr} = {st}   sign-then-encrypt {bs}+{br} = {bt}   ratio {er:.3}\n\
             overhead bytes   signcrypt {so}   sign-then-encrypt {bo}   total ratio {brat:.3}\n\
             cheaper in every run: {every}",
            group = self.group,
            trials = r.trials,
            len = r.message_len,
            ss = r.signcrypt_sender_exps,
            sr = r.signcrypt_receiver_exps,
            st = r.signcrypt_total_exps(),
            bs = r.baseline_sender_exps,
            br = r.baseline_receiver_exps,
            bt = r.baseline_total_exps(),
            er = self.exp_ratio,
            so = self.signcrypt_overhead_bytes,
            bo = self.baseline_overhead_bytes,
            brat = self.byte_ratio,
            every = if r.cheaper_every_run { "yes" } else { "no" },
        )
    }
}
