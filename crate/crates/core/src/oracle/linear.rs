//! Analytic decision oracle over raw samples: a fixed hyperplane labels a
//! clip "pos" or "neg". Useful for validating query-driven estimators
//! against closed-form geometry.

use crate::audio::AudioClip;
use crate::oracle::{Oracle, OracleError, Transcript};

#[derive(Debug, Clone)]
pub struct LinearDecisionOracle {
    weights: Vec<f64>,
    bias: f64,
    sample_rate: u32,
}

impl LinearDecisionOracle {
    /// Weights must be non-empty. Clips shorter than the weight vector are
    /// treated as zero-padded; longer clips ignore the excess samples.
    pub fn new(weights: Vec<f64>, bias: f64, sample_rate: u32) -> LinearDecisionOracle {
        assert!(!weights.is_empty(), "weight vector is empty");
        LinearDecisionOracle { weights, bias, sample_rate }
    }

    pub fn dims(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Signed distance proxy w.x + b.
    pub fn margin(&self, clip: &AudioClip) -> f64 {
        let mut acc = self.bias;
        for (w, s) in self.weights.iter().zip(clip.samples()) {
            acc += w * s;
        }
        acc
    }
}

impl Oracle for LinearDecisionOracle {
    fn transcribe(&self, clip: &AudioClip) -> Result<Transcript, OracleError> {
        if clip.sample_rate() != self.sample_rate {
            return Err(OracleError::BadInput(format!(
                "expected {} Hz, got {} Hz",
                self.sample_rate,
                clip.sample_rate()
            )));
        }
        let label = if self.margin(clip) > 0.0 { "pos" } else { "neg" };
        Ok(Transcript::Text(label.to_string()))
    }

    fn sample_rate(&self) -> u32 {
        self.sample_rate
    }
}
