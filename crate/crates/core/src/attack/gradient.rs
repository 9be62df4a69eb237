//! Gradient estimation from hard labels: probe random unit directions
//! around the current adversarial point and sum them with signs read off
//! the oracle's accept/reject feedback.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::attack::{remaining_budget, AttackConfig, AttackError};
use crate::audio::{mix_at, AudioClip, Perturbation};
use crate::distance::{attack_goal_holds, AttackGoal};
use crate::oracle::{QueryPhase, QuerySession};

/// One probe: the unit direction and the sign its feedback assigned.
#[derive(Debug, Clone)]
pub struct SignSample {
    pub direction: Vec<f64>,
    /// +1.0 when the goal failed at the probe, -1.0 when it held.
    pub sign: f64,
}

/// Estimated loss gradient at an adversarial point, in carrier-length
/// sample space.
#[derive(Debug, Clone)]
pub struct GradientEstimate {
    /// Sum of sign-weighted probe directions. Points toward goal failure,
    /// which is the direction of increasing loss.
    pub direction: Vec<f64>,
    pub sign_samples: Vec<SignSample>,
}

impl GradientEstimate {
    /// Re-derives `direction` from the stored samples, in the same
    /// summation order, for bit-level reproducibility checks.
    pub fn recompute_direction(&self) -> Vec<f64> {
        let len = self.sign_samples.first().map_or(0, |s| s.direction.len());
        sum_signed(&self.sign_samples, len)
    }

    pub fn norm(&self) -> f64 {
        self.direction.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn sum_signed(samples: &[SignSample], len: usize) -> Vec<f64> {
    let mut acc = vec![0.0; len];
    for s in samples {
        for (a, d) in acc.iter_mut().zip(&s.direction) {
            *a += s.sign * d;
        }
    }
    acc
}

/// Probes `gradient_probes` random unit-norm Gaussian directions at
/// `x0 + delta`, spending exactly one query per probe. Must be called at a
/// point where the goal holds; the signs are only informative there.
pub fn estimate_gradient(
    session: &QuerySession,
    x0: &AudioClip,
    delta: &Perturbation,
    goal: &AttackGoal,
    cfg: &AttackConfig,
    rng: &mut impl Rng,
) -> Result<GradientEstimate, AttackError> {
    cfg.validate()?;
    let adversarial = mix_at(x0, delta)?;
    let len = x0.len();
    let mut sign_samples = Vec::with_capacity(cfg.gradient_probes);
    for _ in 0..cfg.gradient_probes {
        if remaining_budget(session, cfg) == 0 {
            // Queries already spent stay on the ledger; the partial
            // estimate is discarded.
            return Err(AttackError::BudgetExhausted);
        }
        let direction = random_unit(len, rng);
        let probe_samples: Vec<f64> = adversarial
            .samples()
            .iter()
            .zip(&direction)
            .map(|(&x, &mu)| x + cfg.sigma * mu)
            .collect();
        let probe = AudioClip::from_unclamped(probe_samples, x0.sample_rate())?;
        let transcript = session.query(&probe, QueryPhase::Gradient)?;
        let holds = attack_goal_holds(&transcript, goal, cfg.count_rejection_as_success);
        sign_samples.push(SignSample { direction, sign: if holds { -1.0 } else { 1.0 } });
    }
    let direction = sum_signed(&sign_samples, len);
    Ok(GradientEstimate { direction, sign_samples })
}

fn random_unit(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
