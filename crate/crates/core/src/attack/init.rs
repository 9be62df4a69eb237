//! Phoneme-level perturbation initialization: random search that injects a
//! noise-dressed phoneme clip at a random position and keeps every draw the
//! oracle's feedback accepts.

use rand::Rng;

use crate::attack::{remaining_budget, AttackConfig, AttackError, ComponentRecord};
use crate::audio::{l2_distortion, mix_at, AudioClip, Perturbation};
use crate::bank::PhonemeBank;
use crate::distance::{attack_goal_holds, cer, AttackGoal};
use crate::oracle::{QueryPhase, QuerySession, Transcript};

/// Everything initialization learned, beyond the bare candidate set.
#[derive(Debug, Clone)]
pub struct InitOutcome {
    /// Accepted perturbations. Untargeted: each one flips the label by
    /// itself. Targeted: the accepted components, in acceptance order.
    pub candidates: Vec<Perturbation>,
    /// Targeted only: all accepted components summed into one perturbation
    /// anchored at the earliest offset.
    pub merged: Option<Perturbation>,
    /// Transcript at the last accepted state (carrier transcript when
    /// nothing was accepted).
    pub final_transcript: Transcript,
    /// Targeted only: the running CER reached zero, so the merged
    /// perturbation produces the target transcript.
    pub reached_target: bool,
    pub components: Vec<ComponentRecord>,
    /// Failed rounds consumed.
    pub failures: usize,
}

/// Random phoneme-injection search. Each round draws per-sample uniform
/// noise in `[0, noise_cap]` over a phoneme window, adds a random bank clip,
/// injects at a random offset, and asks the oracle. Targeted rounds accept
/// on strict CER decrease toward the target and re-base the carrier;
/// untargeted rounds accept on any label flip. Stops after
/// `max_init_failures` rejected rounds or when the query budget runs out.
pub fn phoneme_init(
    session: &QuerySession,
    x0: &AudioClip,
    goal: &AttackGoal,
    bank: &PhonemeBank,
    cfg: &AttackConfig,
    rng: &mut impl Rng,
) -> Result<InitOutcome, AttackError> {
    cfg.validate()?;
    if bank.sample_rate() != x0.sample_rate() {
        return Err(AttackError::BadConfig(format!(
            "bank is at {} Hz, carrier at {} Hz",
            bank.sample_rate(),
            x0.sample_rate()
        )));
    }

    // One verification query: the attack is defined relative to what the
    // oracle says about the clean carrier.
    let baseline = session.query(x0, QueryPhase::Init)?;
    if baseline != Transcript::Text(goal.original.clone()) {
        return Err(AttackError::BadCarrier { expected: goal.original.clone(), got: baseline });
    }

    let mut eps = match &goal.target {
        Some(target) => Some(cer(&baseline, target)?),
        None => None,
    };
    if eps == Some(0.0) {
        // Target equals the carrier transcript; no strict decrease exists,
        // so the search cannot accept anything.
        return Ok(InitOutcome {
            candidates: Vec::new(),
            merged: None,
            final_transcript: baseline,
            reached_target: true,
            components: Vec::new(),
            failures: 0,
        });
    }

    let mut base = x0.clone();
    let mut candidates: Vec<Perturbation> = Vec::new();
    let mut components: Vec<ComponentRecord> = Vec::new();
    let mut final_transcript = baseline;
    let mut reached_target = false;
    let mut failures = 0usize;
    // Union of accepted windows, for the merged cumulative perturbation.
    let mut span: Option<(usize, usize)> = None;

    while failures < cfg.max_init_failures && remaining_budget(session, cfg) > 0 {
        let phoneme = bank.sample(rng);
        let window = phoneme.audio.len().min(base.len());
        let offset = rng.gen_range(0..=base.len() - window);
        let delta_samples: Vec<f64> = (0..window)
            .map(|i| phoneme.audio.samples()[i] + rng.gen_range(0.0..=cfg.noise_cap))
            .collect();
        let delta = AudioClip::from_unclamped(delta_samples, base.sample_rate())?;
        let pert = Perturbation::new(delta, offset);
        let mixed = mix_at(&base, &pert)?;
        let transcript = session.query(&mixed, QueryPhase::Init)?;

        let accepted = match &goal.target {
            Some(target) => {
                let c = cer(&transcript, target)?;
                let current = eps.expect("targeted mode tracks a running CER");
                if c < current {
                    eps = Some(c);
                    true
                } else {
                    false
                }
            }
            None => attack_goal_holds(&transcript, goal, cfg.count_rejection_as_success),
        };

        if accepted {
            components.push(ComponentRecord {
                offset_samples: offset,
                len_samples: window,
                source_id: phoneme.source_id.clone(),
                l2: l2_distortion(&pert),
                query_count: session.total_queries(),
                cer_after: eps.unwrap_or(0.0),
            });
            final_transcript = transcript;
            candidates.push(pert);
            if goal.is_targeted() {
                span = Some(match span {
                    None => (offset, offset + window),
                    Some((lo, hi)) => (lo.min(offset), hi.max(offset + window)),
                });
                base = mixed;
                if eps == Some(0.0) {
                    reached_target = true;
                    break;
                }
            }
        } else {
            failures += 1;
        }
    }

    if candidates.is_empty() {
        return Err(AttackError::InitFailed { failures, queries: session.total_queries() });
    }

    // Targeted: the final carrier already contains every accepted delta
    // (with any clipping the mixer applied), so the exact cumulative
    // perturbation is the difference against the original carrier.
    let merged = span.map(|(lo, hi)| {
        let diff: Vec<f64> = (lo..hi)
            .map(|i| base.samples()[i] - x0.samples()[i])
            .collect();
        let delta = AudioClip::from_unclamped(diff, x0.sample_rate())
            .expect("accepted window is non-empty");
        Perturbation::new(delta, lo)
    });

    Ok(InitOutcome { candidates, merged, final_transcript, reached_target, components, failures })
}
