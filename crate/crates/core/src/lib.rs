//! Black-box adversarial audio toolkit: hard-label attacks on speech-to-text
//! oracles via phoneme-level perturbations, plus signal-level defenses and a
//! benchmark harness.

pub mod attack;
pub mod audio;
pub mod bank;
pub mod defense;
pub mod distance;
mod dsp;
pub mod harness;
pub mod oracle;
pub mod report;
pub mod synth;

pub use attack::{craft, AttackConfig, AttackError, AttackResult};
pub use audio::{AudioClip, AudioError, Perturbation};
pub use distance::{cer, levenshtein, AttackGoal, DistanceError, Loss};
pub use oracle::{estimate_cost, Oracle, OracleError, QueryLedger, QueryPhase, QuerySession, Transcript};
