//! Decision-based attack pipeline against hard-label transcription oracles:
//! phoneme-level initialization, sign-based gradient estimation from binary
//! feedback, and query-efficient norm reduction, with an optional timing
//! robustness (weak synchronization) mode.

mod finetune;
mod gradient;
mod init;

pub use finetune::{fine_tune, weak_sync_loss};
pub use gradient::{estimate_gradient, GradientEstimate, SignSample};
pub use init::{phoneme_init, InitOutcome};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{l2_distortion, mix_at, AudioClip, AudioError, Perturbation};
use crate::bank::PhonemeBank;
use crate::distance::{attack_goal_holds, AttackGoal, DistanceError};
use crate::oracle::{OracleError, QueryLedger, QueryPhase, QuerySession, Transcript};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("carrier transcribes to {got:?}, expected {expected:?}")]
    BadCarrier { expected: String, got: Transcript },
    #[error("initialization found no usable perturbation ({failures} failed rounds, {queries} queries)")]
    InitFailed { failures: usize, queries: u64 },
    #[error("query budget exhausted during gradient estimation")]
    BudgetExhausted,
    #[error("bad attack config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Failed search rounds before initialization gives up (K).
    pub max_init_failures: usize,
    /// Probe directions per gradient estimate (Q).
    pub gradient_probes: usize,
    /// Probe radius around the current adversarial point.
    pub sigma: f64,
    /// Step size along the estimated gradient; halved when a step is
    /// rejected, never below `eta_floor`.
    pub eta: f64,
    pub eta_floor: f64,
    /// Shift count for the timing-mismatch loss (N).
    pub sync_shifts: usize,
    /// Shift interval in milliseconds (tau).
    pub sync_tau_ms: f64,
    /// Distortion level at which fine-tuning declares the result small
    /// enough and stops.
    pub epsilon_l2: f64,
    /// Upper bound of the uniform additive noise drawn during
    /// initialization.
    pub noise_cap: f64,
    /// Hard cap on oracle queries for one attack run.
    pub query_budget: u64,
    pub count_rejection_as_success: bool,
    /// Require the goal to hold at every timing shift during fine-tuning.
    pub weak_sync: bool,
    /// Band-limit (low Hz, high Hz) applied to every candidate perturbation
    /// before it is queried; None disables filtering.
    pub band: Option<(f64, f64)>,
}

impl AttackConfig {
    pub fn targeted_defaults() -> AttackConfig {
        AttackConfig { query_budget: 5_000, ..AttackConfig::untargeted_defaults() }
    }

    pub fn untargeted_defaults() -> AttackConfig {
        AttackConfig {
            max_init_failures: 100,
            gradient_probes: 30,
            sigma: 0.01,
            eta: 0.005,
            eta_floor: 1e-4,
            sync_shifts: 4,
            sync_tau_ms: 100.0,
            epsilon_l2: 10.0,
            noise_cap: 0.1,
            query_budget: 2_000,
            count_rejection_as_success: false,
            weak_sync: false,
            band: Some((50.0, 8_000.0)),
        }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        let bad = |msg: String| Err(AttackError::BadConfig(msg));
        if self.max_init_failures == 0 {
            return bad("max_init_failures must be at least 1".into());
        }
        if self.gradient_probes == 0 {
            return bad("gradient_probes must be at least 1".into());
        }
        if !(self.sigma > 0.0) || !(self.eta > 0.0) || !(self.eta_floor > 0.0) {
            return bad(format!(
                "sigma, eta, eta_floor must be positive (got {}, {}, {})",
                self.sigma, self.eta, self.eta_floor
            ));
        }
        if self.eta_floor > self.eta {
            return bad(format!("eta_floor {} exceeds eta {}", self.eta_floor, self.eta));
        }
        if self.sync_shifts == 0 || !(self.sync_tau_ms > 0.0) {
            return bad("sync_shifts and sync_tau_ms must be positive".into());
        }
        // Shifted copies must stay inside a 400 ms mismatch window.
        let span = self.sync_tau_ms * (self.sync_shifts as f64 - 1.0);
        if span > 400.0 + 1e-9 {
            return bad(format!("sync shifts span {span:.0} ms, limit is 400 ms"));
        }
        if !(self.epsilon_l2 >= 0.0) {
            return bad(format!("epsilon_l2 must be non-negative (got {})", self.epsilon_l2));
        }
        if !(self.noise_cap > 0.0 && self.noise_cap <= 1.0) {
            return bad(format!("noise_cap must be in (0, 1] (got {})", self.noise_cap));
        }
        if self.query_budget == 0 {
            return bad("query_budget must be at least 1".into());
        }
        Ok(())
    }
}

/// One accepted fine-tune state: queries spent so far, distortion, and the
/// loss of the transcript at that state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub query_count: u64,
    pub l2: f64,
    /// CER against the target for targeted goals; 0/1 goal-failure
    /// indicator otherwise.
    pub cer: f64,
}

/// Provenance of one accepted initialization component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub offset_samples: usize,
    pub len_samples: usize,
    pub source_id: String,
    pub l2: f64,
    pub query_count: u64,
    /// Running CER after accepting this component (targeted mode); for
    /// untargeted mode 0.0 marks the label flip.
    pub cer_after: f64,
}

#[derive(Debug, Clone)]
pub struct AttackResult {
    pub perturbation: Perturbation,
    pub final_transcript: Transcript,
    pub success: bool,
    pub ledger: QueryLedger,
    pub l2: f64,
    /// Fine-tune states only (entry plus accepted steps); l2 is
    /// non-increasing along it. Initialization components are listed in
    /// `components` instead.
    pub trace: Vec<TracePoint>,
    pub components: Vec<ComponentRecord>,
}

impl AttackResult {
    fn failed(
        perturbation: Perturbation,
        final_transcript: Transcript,
        session: &QuerySession,
    ) -> AttackResult {
        let l2 = l2_distortion(&perturbation);
        AttackResult {
            perturbation,
            final_transcript,
            success: false,
            ledger: session.ledger(),
            l2,
            trace: Vec::new(),
            components: Vec::new(),
        }
    }
}

pub(crate) fn remaining_budget(session: &QuerySession, cfg: &AttackConfig) -> u64 {
    cfg.query_budget.saturating_sub(session.total_queries())
}

/// Zero-length perturbation stand-in for degenerate goals.
fn zero_perturbation(x0: &AudioClip) -> Perturbation {
    let delta = AudioClip::new(vec![0.0; x0.len()], x0.sample_rate()).expect("carrier non-empty");
    Perturbation::new(delta, 0)
}

/// Full crafting pipeline: initialize candidate perturbations, then
/// fine-tune them toward low distortion, all against one query session so
/// the returned ledger covers every phase.
pub fn craft(
    oracle: &dyn crate::oracle::Oracle,
    x0: &AudioClip,
    goal: &AttackGoal,
    bank: &PhonemeBank,
    cfg: &AttackConfig,
    rng: &mut impl Rng,
) -> Result<AttackResult, AttackError> {
    cfg.validate()?;
    let session = QuerySession::new(oracle);
    let init = phoneme_init(&session, x0, goal, bank, cfg, rng)?;

    if goal.is_targeted() {
        if !init.reached_target {
            // No candidate ever produced the target transcript; report the
            // partial perturbation as a failure.
            let pert = init.merged.unwrap_or_else(|| zero_perturbation(x0));
            let mut res = AttackResult::failed(pert, init.final_transcript, &session);
            res.components = init.components;
            return Ok(res);
        }
        let Some(merged) = init.merged else {
            // Target equals the carrier's own transcript: nothing to craft.
            let mut res = AttackResult::failed(zero_perturbation(x0), init.final_transcript, &session);
            res.success = true;
            return Ok(res);
        };
        let mut res = fine_tune(&session, x0, &merged, goal, cfg, rng)?;
        res.components = init.components;
        return Ok(res);
    }

    // Untargeted: every accepted candidate flips the label on its own.
    // Fine-tune them cheapest-first until one comes back successful.
    let mut order: Vec<usize> = (0..init.candidates.len()).collect();
    order.sort_by(|&a, &b| {
        l2_distortion(&init.candidates[a])
            .total_cmp(&l2_distortion(&init.candidates[b]))
            .then(a.cmp(&b))
    });
    let mut last: Option<AttackResult> = None;
    for idx in order {
        if remaining_budget(&session, cfg) == 0 && last.is_some() {
            break;
        }
        let mut res = fine_tune(&session, x0, &init.candidates[idx], goal, cfg, rng)?;
        res.components = vec![init.components[idx].clone()];
        if res.success {
            return Ok(res);
        }
        last = Some(res);
    }
    Ok(last.expect("initialization produced at least one candidate"))
}

/// Re-queries a crafted perturbation at a range of timing offsets and
/// reports whether the goal still holds at each delay.
pub fn mismatch_sweep(
    session: &QuerySession,
    x0: &AudioClip,
    result: &AttackResult,
    goal: &AttackGoal,
    delays_ms: &[u32],
    cfg: &AttackConfig,
) -> Result<Vec<(u32, bool)>, AttackError> {
    let rate = x0.sample_rate() as f64;
    let mut curve = Vec::with_capacity(delays_ms.len());
    for &delay in delays_ms {
        let shift = (delay as f64 / 1_000.0 * rate).round() as usize;
        let shifted = Perturbation::new(
            result.perturbation.delta.clone(),
            result.perturbation.offset_samples + shift,
        );
        let mixed = mix_at(x0, &shifted)?;
        let t = session.query(&mixed, QueryPhase::Eval)?;
        curve.push((delay, attack_goal_holds(&t, goal, cfg.count_rejection_as_success)));
    }
    Ok(curve)
}


#[cfg(test)]
mod tests {
    use super::testing::{SumOracle, ThresholdOracle};
    use super::*;
    use crate::audio::tone;
    use crate::bank::{build_bank, BankConfig};
    use crate::oracle::Oracle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    // Amp 0.25 keeps carrier plus two stacked components inside [-1, 1], so
    // the merged targeted perturbation reproduces the re-based carrier exactly.
    fn tone_bank() -> (tempfile::TempDir, PhonemeBank) {
        let dir = tempfile::tempdir().unwrap();
        crate::audio::save_wav(&tone(523.0, 1.0, 0.25, 16_000), dir.path().join("t.wav")).unwrap();
        let bank = build_bank(dir.path(), &BankConfig { n_clips: 8, seed: 1, ..BankConfig::default() })
            .unwrap();
        (dir, bank)
    }

    #[test]
    fn config_validation() {
        assert!(AttackConfig::untargeted_defaults().validate().is_ok());
        assert!(AttackConfig::targeted_defaults().validate().is_ok());
        let mut cfg = AttackConfig::untargeted_defaults();
        cfg.gradient_probes = 0;
        assert!(matches!(cfg.validate(), Err(AttackError::BadConfig(_))));
        let mut cfg = AttackConfig::untargeted_defaults();
        cfg.sync_shifts = 6;
        cfg.sync_tau_ms = 100.0;
        assert!(matches!(cfg.validate(), Err(AttackError::BadConfig(_))));
        let mut cfg = AttackConfig::untargeted_defaults();
        cfg.eta_floor = cfg.eta * 2.0;
        assert!(matches!(cfg.validate(), Err(AttackError::BadConfig(_))));
    }

    #[test]
    fn craft_untargeted_flips_threshold_oracle() {
        let oracle = ThresholdOracle { base: "yes", alt: "no", rms_threshold: 0.08 };
        let x0 = tone(220.0, 1.0, 0.07, 16_000);
        assert_eq!(oracle.transcribe(&x0).unwrap(), Transcript::Text("yes".into()));
        let (_dir, bank) = tone_bank();
        let goal = AttackGoal::untargeted("yes");
        // The toy oracle keys on RMS including DC, which band-limiting strips.
        let cfg = AttackConfig { band: None, ..AttackConfig::untargeted_defaults() };
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let res = craft(&oracle, &x0, &goal, &bank, &cfg, &mut rng).unwrap();
        assert!(res.success);
        assert!(attack_goal_holds(&res.final_transcript, &goal, false));
        assert!(res.ledger.is_consistent());
        assert!(res.ledger.total_queries <= cfg.query_budget);
        assert!((res.l2 - l2_distortion(&res.perturbation)).abs() < 1e-9);
        for w in res.trace.windows(2) {
            assert!(w[1].l2 < w[0].l2, "trace l2 must strictly decrease");
        }
    }

    #[test]
    fn craft_targeted_reaches_band_label() {
        // The threshold gap stays below one window's worth of noise-mean so a
        // second component can always bridge it from any first-accept state.
        let oracle = SumOracle { low: 20.0, high: 150.0 };
        let x0 = tone(220.0, 1.0, 0.3, 16_000);
        assert_eq!(oracle.transcribe(&x0).unwrap(), Transcript::Text("aaa".into()));
        let (_dir, bank) = tone_bank();
        let goal = AttackGoal::targeted("aaa", "abb");
        // The sum oracle keys on DC, which band-limiting strips.
        let cfg = AttackConfig { band: None, ..AttackConfig::targeted_defaults() };
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let res = craft(&oracle, &x0, &goal, &bank, &cfg, &mut rng).unwrap();
        assert!(res.success);
        assert_eq!(res.final_transcript, Transcript::Text("abb".into()));
        assert!(!res.components.is_empty());
        // Accepted components carry strictly decreasing running CER.
        for w in res.components.windows(2) {
            assert!(w[1].cer_after < w[0].cer_after);
        }
        assert!(res.ledger.is_consistent());
    }

    #[test]
    fn craft_degenerate_target_is_vacuous_success() {
        let oracle = SumOracle { low: 20.0, high: 300.0 };
        let x0 = tone(220.0, 1.0, 0.3, 16_000);
        let (_dir, bank) = tone_bank();
        let goal = AttackGoal::targeted("aaa", "aaa");
        let cfg = AttackConfig::targeted_defaults();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let res = craft(&oracle, &x0, &goal, &bank, &cfg, &mut rng).unwrap();
        assert!(res.success);
        assert_eq!(res.l2, 0.0);
        assert_eq!(res.ledger.total_queries, 1, "only the carrier verification");
    }

    #[test]
    fn mismatch_sweep_shapes() {
        let oracle = ThresholdOracle { base: "yes", alt: "no", rms_threshold: 0.08 };
        let x0 = tone(220.0, 1.0, 0.07, 16_000);
        let (_dir, bank) = tone_bank();
        let goal = AttackGoal::untargeted("yes");
        let cfg = AttackConfig { band: None, ..AttackConfig::untargeted_defaults() };
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let res = craft(&oracle, &x0, &goal, &bank, &cfg, &mut rng).unwrap();
        assert!(res.success);

        let session = QuerySession::new(&oracle);
        let empty = mismatch_sweep(&session, &x0, &res, &goal, &[], &cfg).unwrap();
        assert!(empty.is_empty());
        assert_eq!(session.total_queries(), 0);

        let curve = mismatch_sweep(&session, &x0, &res, &goal, &[0, 100, 200], &cfg).unwrap();
        assert_eq!(curve.len(), 3);
        assert_eq!(curve[0], (0, true), "zero delay replays the crafted input");
        assert_eq!(session.total_queries(), 3);
    }
}
