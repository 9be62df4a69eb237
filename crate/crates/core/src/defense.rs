//! Signal-level defenses a deployed transcription service could apply to
//! incoming audio, plus a harness that measures how many previously
//! successful adversarial examples survive each one.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::AttackResult;
use crate::audio::{mix_at, resample, AudioClip, AudioError};
use crate::distance::{attack_goal_holds, AttackGoal};
use crate::dsp;
use crate::oracle::{Oracle, OracleError, Transcript};

#[derive(Debug, Error)]
pub enum DefenseError {
    #[error("down-sample rate {target} Hz must be below the source rate {source_rate} Hz")]
    RateNotBelowSource { target: u32, source_rate: u32 },
    #[error("quantization step {0} outside [2, 32768]")]
    BadQuantStep(u32),
    #[error("unknown defense spec '{0}'")]
    UnknownSpec(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// One defense configuration. Paper-typical parameter values are 8000/4000
/// Hz down-sampling, steps of 256/512/1024, and a 4 kHz order-6 low-pass,
/// but any in-range values are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefenseSpec {
    None,
    /// Resample down to `rate`; `round_trip` resamples back up so the
    /// oracle input format is unchanged (the default convention).
    DownSample { rate: u32, round_trip: bool },
    Quantize { q: u32 },
    LowPass { cutoff_hz: u32, order: usize },
}

impl fmt::Display for DefenseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DefenseSpec::None => write!(f, "none"),
            DefenseSpec::DownSample { rate, round_trip: true } => write!(f, "ds{rate}"),
            DefenseSpec::DownSample { rate, round_trip: false } => write!(f, "ds{rate}raw"),
            DefenseSpec::Quantize { q } => write!(f, "q{q}"),
            DefenseSpec::LowPass { cutoff_hz, order } => write!(f, "lp{cutoff_hz}o{order}"),
        }
    }
}

impl FromStr for DefenseSpec {
    type Err = DefenseError;

    /// Accepts the display forms: `none`, `ds8000`, `ds4000raw`, `q256`,
    /// `lp4000o6` (order suffix optional, default 6).
    fn from_str(s: &str) -> Result<DefenseSpec, DefenseError> {
        let bad = || DefenseError::UnknownSpec(s.to_string());
        if s == "none" {
            return Ok(DefenseSpec::None);
        }
        if let Some(rest) = s.strip_prefix("ds") {
            let (num, round_trip) = match rest.strip_suffix("raw") {
                Some(n) => (n, false),
                None => (rest, true),
            };
            let rate = num.parse().map_err(|_| bad())?;
            return Ok(DefenseSpec::DownSample { rate, round_trip });
        }
        if let Some(rest) = s.strip_prefix("q") {
            let q = rest.parse().map_err(|_| bad())?;
            return Ok(DefenseSpec::Quantize { q });
        }
        if let Some(rest) = s.strip_prefix("lp") {
            let (cut, order) = match rest.split_once('o') {
                Some((c, o)) => (c, o.parse().map_err(|_| bad())?),
                None => (rest, 6),
            };
            let cutoff_hz = cut.parse().map_err(|_| bad())?;
            return Ok(DefenseSpec::LowPass { cutoff_hz, order });
        }
        Err(bad())
    }
}

/// Down-sample to `rate` and resample back to the source rate, removing
/// energy above the intermediate Nyquist. Output length is pinned to the
/// input length (the resampler round trip can drift by a sample).
pub fn defend_downsample(clip: &AudioClip, rate: u32) -> Result<AudioClip, DefenseError> {
    if rate >= clip.sample_rate() {
        return Err(DefenseError::RateNotBelowSource { target: rate, source_rate: clip.sample_rate() });
    }
    let down = resample(clip, rate)?;
    let up = resample(&down, clip.sample_rate())?;
    let mut samples = up.into_samples();
    samples.resize(clip.len(), 0.0);
    Ok(AudioClip::from_unclamped(samples, clip.sample_rate())?)
}

/// Rounds each sample's int16 representation to the nearest multiple of
/// `q`, ties to even, in exact integer arithmetic, then rescales.
pub fn defend_quantize(clip: &AudioClip, q: u32) -> Result<AudioClip, DefenseError> {
    if !(2..=32_768).contains(&q) {
        return Err(DefenseError::BadQuantStep(q));
    }
    let q = i64::from(q);
    let samples = clip
        .samples()
        .iter()
        .map(|&s| {
            let i = ((s * 32_768.0).round() as i64).clamp(-32_768, 32_767);
            let div = i.div_euclid(q);
            let rem = i.rem_euclid(q);
            let k = match (2 * rem).cmp(&q) {
                std::cmp::Ordering::Less => div,
                std::cmp::Ordering::Greater => div + 1,
                std::cmp::Ordering::Equal => {
                    if div % 2 == 0 {
                        div
                    } else {
                        div + 1
                    }
                }
            };
            (k * q) as f64 / 32_768.0
        })
        .collect();
    // The grid extends one LSB past the int16 clamp at the rails; clipping
    // there is stable under re-application, so idempotence is preserved.
    Ok(AudioClip::from_unclamped(samples, clip.sample_rate())?)
}

/// Causal single-pass Butterworth low-pass, run as cascaded second-order
/// sections. A deployed defense filters live input, so unlike the
/// attack-side band limiter this is not zero-phase.
pub fn defend_lowpass(clip: &AudioClip, cutoff_hz: u32, order: usize) -> Result<AudioClip, DefenseError> {
    let nyquist = clip.sample_rate() as f64 / 2.0;
    let cutoff = cutoff_hz as f64;
    if cutoff <= 0.0 || cutoff >= nyquist || order == 0 {
        return Err(DefenseError::Audio(AudioError::BandError {
            low: 0.0,
            high: cutoff,
            rate: clip.sample_rate(),
        }));
    }
    let sections = dsp::butterworth_lowpass(cutoff, clip.sample_rate() as f64, order);
    let filtered = dsp::filt(&sections, clip.samples());
    Ok(AudioClip::from_unclamped(filtered, clip.sample_rate())?)
}

pub fn apply_defense(clip: &AudioClip, spec: &DefenseSpec) -> Result<AudioClip, DefenseError> {
    match *spec {
        DefenseSpec::None => Ok(clip.clone()),
        DefenseSpec::DownSample { rate, round_trip: true } => defend_downsample(clip, rate),
        DefenseSpec::DownSample { rate, round_trip: false } => {
            if rate >= clip.sample_rate() {
                return Err(DefenseError::RateNotBelowSource {
                    target: rate,
                    source_rate: clip.sample_rate(),
                });
            }
            Ok(resample(clip, rate)?)
        }
        DefenseSpec::Quantize { q } => defend_quantize(clip, q),
        DefenseSpec::LowPass { cutoff_hz, order } => defend_lowpass(clip, cutoff_hz, order),
    }
}

/// A crafted attack bundled with the carrier and goal it was crafted
/// against, which is everything needed to replay it through a defense.
#[derive(Debug, Clone)]
pub struct AdversarialExample {
    pub carrier: AudioClip,
    pub goal: AttackGoal,
    pub result: AttackResult,
}

impl AdversarialExample {
    pub fn adversarial_waveform(&self) -> Result<AudioClip, AudioError> {
        mix_at(&self.carrier, &self.result.perturbation)
    }
}

/// Post-defense outcome over a set of adversarial examples.
/// `success_before` is the crafted success rate carried in the results;
/// `success_after` re-queries each defended adversarial waveform;
/// `clean_accuracy_after` re-queries each defended clean carrier against
/// its original transcription.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DefenseReport {
    pub spec: String,
    pub n: usize,
    pub success_before: f64,
    pub success_after: f64,
    pub clean_accuracy_after: f64,
}

impl DefenseReport {
    pub fn csv_header() -> &'static str {
        "spec,n,success_before,success_after,clean_accuracy_after"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.spec, self.n, self.success_before, self.success_after, self.clean_accuracy_after
        )
    }
}

pub fn evaluate_defense(
    oracle: &dyn Oracle,
    aes: &[AdversarialExample],
    spec: &DefenseSpec,
    count_rejection_as_success: bool,
) -> Result<DefenseReport, DefenseError> {
    let n = aes.len();
    let mut success_before = 0usize;
    let mut success_after = 0usize;
    let mut clean_ok = 0usize;
    for ae in aes {
        if ae.result.success {
            success_before += 1;
        }
        let defended = apply_defense(&ae.adversarial_waveform()?, spec)?;
        let t = oracle.transcribe(&defended)?;
        if attack_goal_holds(&t, &ae.goal, count_rejection_as_success) {
            success_after += 1;
        }
        let clean = apply_defense(&ae.carrier, spec)?;
        if oracle.transcribe(&clean)? == Transcript::Text(ae.goal.original.clone()) {
            clean_ok += 1;
        }
    }
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    Ok(DefenseReport {
        spec: spec.to_string(),
        n,
        success_before: frac(success_before),
        success_after: frac(success_after),
        clean_accuracy_after: frac(clean_ok),
    })
}
