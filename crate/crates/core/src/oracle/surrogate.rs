//! Surrogate keyword-spotting oracle: per-label templates of
//! energy-weighted MFCC statistics, nearest-template classification, and a
//! calibrated rejection threshold.
//!
//! Pooling is weighted by frame energy so that a short, energetic segment
//! moves the pooled statistics in proportion to its power, not just its
//! duration; this is what gives the oracle a realistic decision geometry
//! for injected audio.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mfcc::{frame_features, MfccConfig};
use super::{Oracle, OracleError, Transcript};
use crate::audio::{load_wav, AudioClip};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("need at least {need} labels, corpus has {got}")]
    TooFewLabels { need: usize, got: usize },
    #[error("label {label:?} has {got} utterances, need at least {need}")]
    TooFewUtterances { label: String, need: usize, got: usize },
    #[error("corpus mixes sample rates: {a} Hz and {b} Hz")]
    MixedRates { a: u32, b: u32 },
    #[error("corpus io: {0}")]
    Io(String),
}

pub const MIN_LABELS: usize = 2;
pub const MIN_UTTERANCES_PER_LABEL: usize = 5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub mfcc: MfccConfig,
    /// Fraction of each label held out for threshold calibration.
    pub holdout_fraction: f64,
    /// Frame pooling weight is energy raised to this exponent.
    pub energy_exponent: f64,
    /// Relative weight of the variance half of the feature in distances.
    pub variance_weight: f64,
    /// Per-dimension distance scales are floored at this fraction of the
    /// median scale. Prevents dimensions that are nearly constant across
    /// the training corpus from dominating every out-of-corpus distance.
    pub scale_floor_frac: f64,
    /// Synthetic two-label mixtures generated during calibration.
    pub calibration_mixtures: usize,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> SurrogateConfig {
        SurrogateConfig {
            mfcc: MfccConfig::default(),
            holdout_fraction: 0.25,
            energy_exponent: 2.0,
            variance_weight: 0.15,
            scale_floor_frac: 0.5,
            calibration_mixtures: 400,
            seed: 0,
        }
    }
}

/// One label's template: the centroid of its training utterances' pooled
/// feature vectors (energy-weighted mean followed by variance dims).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelTemplate {
    pub label: String,
    pub centroid: Vec<f64>,
}

/// Trained surrogate model. Labels are sorted; every label has exactly one
/// template; the rejection threshold is finite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub sample_rate: u32,
    pub mfcc: MfccConfig,
    pub energy_exponent: f64,
    pub variance_weight: f64,
    pub templates: Vec<LabelTemplate>,
    /// Global per-dimension scales used to normalize distances.
    pub scales: Vec<f64>,
    /// Reject when the best normalized template distance exceeds this.
    pub rejection_threshold: f64,
}

/// Calibration statistics measured on held-out data during training.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub held_out: usize,
    pub mixtures: usize,
    pub held_out_accept_rate: f64,
    pub held_out_top1_accuracy: f64,
    pub mixture_reject_rate: f64,
    pub rejection_threshold: f64,
}

#[derive(Debug, Clone)]
pub struct LabeledClip {
    pub label: String,
    pub clip: AudioClip,
}

impl SurrogateModel {
    /// Energy-weighted pooled feature: weighted mean of each MFCC dim over
    /// frames, then weighted variance of each dim.
    pub fn pooled_features(&self, clip: &AudioClip) -> Vec<f64> {
        pooled_features(clip, &self.mfcc, self.energy_exponent)
    }

    /// Normalized distance from a pooled feature vector to each template,
    /// as (label index, distance), plus the runner-up distance.
    pub fn distances(&self, feature: &[f64]) -> Vec<f64> {
        let dims = feature.len();
        let mean_dims = dims / 2;
        self.templates
            .iter()
            .map(|t| {
                let mut acc = 0.0;
                let mut wsum = 0.0;
                for i in 0..dims {
                    let w = if i < mean_dims { 1.0 } else { self.variance_weight };
                    let z = (feature[i] - t.centroid[i]) / self.scales[i];
                    acc += w * z * z;
                    wsum += w;
                }
                (acc / wsum).sqrt()
            })
            .collect()
    }

    /// Hard-label decision: nearest template, or `Rejected` when the best
    /// distance exceeds the rejection threshold.
    pub fn classify(&self, clip: &AudioClip) -> (Transcript, f64) {
        let feature = self.pooled_features(clip);
        let dists = self.distances(&feature);
        let (best, &best_d) = dists
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite distances"))
            .expect("at least one template");
        if best_d > self.rejection_threshold {
            (Transcript::Rejected, best_d)
        } else {
            (Transcript::Text(self.templates[best].label.clone()), best_d)
        }
    }

    pub fn labels(&self) -> Vec<&str> {
        self.templates.iter().map(|t| t.label.as_str()).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        let json = serde_json::to_string_pretty(self).expect("model serializes");
        fs::write(path, json).map_err(|e| TrainError::Io(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SurrogateModel, TrainError> {
        let json = fs::read_to_string(path).map_err(|e| TrainError::Io(e.to_string()))?;
        serde_json::from_str(&json).map_err(|e| TrainError::Io(e.to_string()))
    }
}

impl Oracle for SurrogateModel {
    fn transcribe(&self, clip: &AudioClip) -> Result<Transcript, OracleError> {
        if clip.sample_rate() != self.sample_rate {
            return Err(OracleError::BadInput(format!(
                "expected {} Hz, got {} Hz",
                self.sample_rate,
                clip.sample_rate()
            )));
        }
        Ok(self.classify(clip).0)
    }

    fn sample_rate(&self) -> u32 {
        self.sample_rate
    }
}

fn pooled_features(clip: &AudioClip, mfcc: &MfccConfig, energy_exponent: f64) -> Vec<f64> {
    let feats = frame_features(clip, mfcc);
    let dims = mfcc.dims();
    let weights: Vec<f64> = feats
        .energies
        .iter()
        .map(|&e| (e + 1e-12).powf(energy_exponent))
        .collect();
    let wsum: f64 = weights.iter().sum();
    let mut mean = vec![0.0; dims];
    for (frame, &w) in feats.frames.iter().zip(&weights) {
        for (m, &v) in mean.iter_mut().zip(frame) {
            *m += w * v;
        }
    }
    for m in &mut mean {
        *m /= wsum;
    }
    let mut var = vec![0.0; dims];
    for (frame, &w) in feats.frames.iter().zip(&weights) {
        for ((vv, &v), &m) in var.iter_mut().zip(frame).zip(&mean) {
            *vv += w * (v - m) * (v - m);
        }
    }
    for v in &mut var {
        *v /= wsum;
    }
    mean.extend(var);
    mean
}

/// Trains a surrogate model. Needs at least 2 labels and 5 utterances per
/// label; splits off a held-out set per label, fits templates on the rest,
/// and calibrates the rejection threshold so held-out utterances are
/// accepted while equal-power two-label mixtures are rejected.
/// Deterministic for a fixed corpus and seed.
pub fn train_surrogate(
    corpus: &[LabeledClip],
    cfg: &SurrogateConfig,
) -> Result<(SurrogateModel, CalibrationReport), TrainError> {
    let mut by_label: BTreeMap<&str, Vec<&AudioClip>> = BTreeMap::new();
    for lc in corpus {
        by_label.entry(&lc.label).or_default().push(&lc.clip);
    }
    if by_label.len() < MIN_LABELS {
        return Err(TrainError::TooFewLabels { need: MIN_LABELS, got: by_label.len() });
    }
    let mut rate: Option<u32> = None;
    for (label, clips) in &by_label {
        if clips.len() < MIN_UTTERANCES_PER_LABEL {
            return Err(TrainError::TooFewUtterances {
                label: (*label).to_string(),
                need: MIN_UTTERANCES_PER_LABEL,
                got: clips.len(),
            });
        }
        for c in clips {
            match rate {
                None => rate = Some(c.sample_rate()),
                Some(r) if r != c.sample_rate() => {
                    return Err(TrainError::MixedRates { a: r, b: c.sample_rate() })
                }
                _ => {}
            }
        }
    }
    let sample_rate = rate.expect("non-empty corpus");
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);

    // Per-label split, templates from the training side.
    let mut templates = Vec::new();
    let mut train_features: Vec<Vec<f64>> = Vec::new();
    let mut held_out: Vec<(usize, &AudioClip)> = Vec::new();
    for (li, (label, clips)) in by_label.iter().enumerate() {
        let mut order: Vec<usize> = (0..clips.len()).collect();
        order.shuffle(&mut rng);
        let n_hold = ((clips.len() as f64 * cfg.holdout_fraction).round() as usize)
            .clamp(1, clips.len() - 1);
        let (hold_idx, train_idx) = order.split_at(n_hold);
        let feats: Vec<Vec<f64>> = train_idx
            .iter()
            .map(|&i| pooled_features(clips[i], &cfg.mfcc, cfg.energy_exponent))
            .collect();
        let dims = feats[0].len();
        let mut centroid = vec![0.0; dims];
        for f in &feats {
            for (c, v) in centroid.iter_mut().zip(f) {
                *c += v;
            }
        }
        for c in &mut centroid {
            *c /= feats.len() as f64;
        }
        templates.push(LabelTemplate { label: (*label).to_string(), centroid });
        train_features.extend(feats);
        held_out.extend(hold_idx.iter().map(|&i| (li, clips[i])));
    }

    // Global per-dimension scales from the training features.
    let dims = train_features[0].len();
    let n = train_features.len() as f64;
    let mut mean = vec![0.0; dims];
    for f in &train_features {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut scales = vec![0.0; dims];
    for f in &train_features {
        for ((s, v), m) in scales.iter_mut().zip(f).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut scales {
        *s = (*s / n).sqrt().max(1e-6);
    }
    // Variance flooring: a dimension that happens to be almost constant
    // across training pooled features (weighted-mean deltas are ~0 for every
    // whole utterance) would otherwise dominate the distance of any clip
    // that is not a whole utterance.
    let mut sorted = scales.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scales"));
    let floor = sorted[sorted.len() / 2] * cfg.scale_floor_frac;
    for s in &mut scales {
        *s = s.max(floor);
    }

    let mut model = SurrogateModel {
        sample_rate,
        mfcc: cfg.mfcc.clone(),
        energy_exponent: cfg.energy_exponent,
        variance_weight: cfg.variance_weight,
        templates,
        scales,
        rejection_threshold: f64::INFINITY,
    };

    // Calibration: distances of held-out positives vs two-label mixtures.
    let mut positive_d: Vec<f64> = Vec::with_capacity(held_out.len());
    let mut correct_nearest: Vec<bool> = Vec::with_capacity(held_out.len());
    for &(li, clip) in &held_out {
        let feature = model.pooled_features(clip);
        let dists = model.distances(&feature);
        let best = argmin(&dists);
        positive_d.push(dists[best]);
        correct_nearest.push(best == li);
    }
    let mut mixture_d = Vec::with_capacity(cfg.calibration_mixtures);
    for _ in 0..cfg.calibration_mixtures {
        let (a, b) = loop {
            let a = held_out[rng.gen_range(0..held_out.len())];
            let b = held_out[rng.gen_range(0..held_out.len())];
            if a.0 != b.0 {
                break (a.1, b.1);
            }
        };
        let mixed = equal_power_mixture(a, b);
        let dists = model.distances(&model.pooled_features(&mixed));
        mixture_d.push(dists[argmin(&dists)]);
    }

    // Accept bound: 95% of held-out positives must stay inside. Reject
    // bound: sit just under the 6th percentile of mixture distances, so a
    // comfortable 94% of mixtures stay outside. Between the two bounds the
    // looser (larger) threshold wins: a roomy accept region is what keeps
    // near-vocabulary audio classifiable.
    let p_accept = percentile(&mut positive_d.clone(), 0.95);
    let p_reject = percentile(&mut mixture_d.clone(), 0.06);
    model.rejection_threshold = if p_reject > p_accept { p_reject * 0.999 } else { p_accept };

    let accepted = positive_d
        .iter()
        .filter(|&&d| d <= model.rejection_threshold)
        .count();
    let correct = held_out
        .iter()
        .zip(&correct_nearest)
        .zip(&positive_d)
        .filter(|((_, &near), &d)| near && d <= model.rejection_threshold)
        .count();
    let rejected = mixture_d
        .iter()
        .filter(|&&d| d > model.rejection_threshold)
        .count();
    let report = CalibrationReport {
        held_out: held_out.len(),
        mixtures: mixture_d.len(),
        held_out_accept_rate: accepted as f64 / held_out.len() as f64,
        held_out_top1_accuracy: correct as f64 / held_out.len() as f64,
        mixture_reject_rate: rejected as f64 / mixture_d.len() as f64,
        rejection_threshold: model.rejection_threshold,
    };
    Ok((model, report))
}

/// Overlap-adds two clips scaled to a common RMS, at half gain each.
pub fn equal_power_mixture(a: &AudioClip, b: &AudioClip) -> AudioClip {
    let target = (a.rms() * b.rms()).sqrt().max(1e-9);
    let n = a.len().max(b.len());
    let ga = target / a.rms().max(1e-9);
    let gb = target / b.rms().max(1e-9);
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let xa = a.samples().get(i).copied().unwrap_or(0.0) * ga;
            let xb = b.samples().get(i).copied().unwrap_or(0.0) * gb;
            (xa + xb) / 2.0
        })
        .collect();
    AudioClip::from_unclamped(samples, a.sample_rate()).expect("non-empty mixture")
}

fn argmin(xs: &[f64]) -> usize {
    xs.iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite"))
        .expect("non-empty")
        .0
}

fn percentile(xs: &mut [f64], p: f64) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let idx = ((xs.len() as f64 - 1.0) * p).round() as usize;
    xs[idx]
}

/// Loads a labeled corpus laid out as `dir/<label>/*.wav`, sorted for
/// determinism.
pub fn load_labeled_corpus(dir: impl AsRef<Path>) -> Result<Vec<LabeledClip>, TrainError> {
    let mut out = Vec::new();
    let mut labels: Vec<_> = fs::read_dir(dir.as_ref())
        .map_err(|e| TrainError::Io(e.to_string()))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.path())
        .collect();
    labels.sort();
    for label_dir in labels {
        let label = label_dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut files: Vec<_> = fs::read_dir(&label_dir)
            .map_err(|e| TrainError::Io(e.to_string()))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "wav"))
            .collect();
        files.sort();
        for f in files {
            let clip = load_wav(&f).map_err(|e| TrainError::Io(format!("{}: {e}", f.display())))?;
            out.push(LabeledClip { label: label.clone(), clip });
        }
    }
    Ok(out)
}
