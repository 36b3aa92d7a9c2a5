//! Attack harness: concrete attacker strategies run over a simulated
//! network, and a bounded symbolic (Dolev-Yao) search over the login roles.

mod channel;
mod scenario;
pub mod symbolic;

pub use channel::{Action, Delivery, Direction, EntryKind, Honest, Interceptor, SimChannel, TranscriptEntry};
pub use scenario::{
    learned_from_transcript, run_ablation, run_honest, run_scenario, run_scenario_on, stale_replay_rate, Ablation,
    AttackOutcome, RunSecrets, Scenario, ScenarioError, SecretLabel, StaleStats, UnknownScenario, World,
};
