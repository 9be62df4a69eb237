//! MFCC front end for the surrogate keyword spotter: Hann-windowed frames,
//! mel filterbank, DCT, and delta features.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub n_coeffs: usize,
    pub n_filters: usize,
    /// Upper edge of the mel filterbank in Hz; energy above it is invisible
    /// to the features. Clamped to Nyquist at feature time.
    pub fmax_hz: f64,
}

impl Default for MfccConfig {
    fn default() -> MfccConfig {
        MfccConfig {
            frame_ms: 25.0,
            hop_ms: 10.0,
            n_coeffs: 13,
            n_filters: 26,
            fmax_hz: 4_000.0,
        }
    }
}

impl MfccConfig {
    /// Feature dimensionality per frame: coefficients plus their deltas.
    pub fn dims(&self) -> usize {
        self.n_coeffs * 2
    }
}

/// Per-frame MFCC+delta vectors and per-frame mean-square energies.
pub struct FrameFeatures {
    pub frames: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
}

fn fft_for(len: usize) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().expect("fft cache lock");
    cache
        .entry(len)
        .or_insert_with(|| FftPlanner::new().plan_fft_forward(len))
        .clone()
}

fn hz_to_mel(hz: f64) -> f64 {
    2_595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2_595.0) - 1.0)
}

/// Triangular mel filterbank over FFT bins 0..=n_fft/2, spanning 0..fmax.
fn mel_filterbank(
    n_filters: usize,
    n_fft: usize,
    sample_rate: u32,
    fmax_hz: f64,
) -> Vec<Vec<(usize, f64)>> {
    let nyquist = sample_rate as f64 / 2.0;
    let mel_lo = hz_to_mel(0.0);
    let mel_hi = hz_to_mel(fmax_hz.min(nyquist).max(200.0));
    let centers: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_filters + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / n_fft as f64;
    (0..n_filters)
        .map(|m| {
            let (lo, mid, hi) = (centers[m], centers[m + 1], centers[m + 2]);
            let mut taps = Vec::new();
            let b_lo = (lo / bin_hz).ceil() as usize;
            let b_hi = ((hi / bin_hz).floor() as usize).min(n_fft / 2);
            for b in b_lo..=b_hi {
                let f = b as f64 * bin_hz;
                let w = if f <= mid {
                    (f - lo) / (mid - lo).max(1e-9)
                } else {
                    (hi - f) / (hi - mid).max(1e-9)
                };
                if w > 0.0 {
                    taps.push((b, w));
                }
            }
            taps
        })
        .collect()
}

/// Computes MFCC+delta frame features for a clip. Clips shorter than one
/// frame are zero-padded to a single frame.
pub fn frame_features(clip: &AudioClip, cfg: &MfccConfig) -> FrameFeatures {
    let rate = clip.sample_rate();
    let frame_len = ((cfg.frame_ms / 1_000.0 * rate as f64).round() as usize).max(1);
    let hop = ((cfg.hop_ms / 1_000.0 * rate as f64).round() as usize).max(1);
    let n_fft = frame_len.next_power_of_two();
    let fft = fft_for(n_fft);
    let filters = mel_filterbank(cfg.n_filters, n_fft, rate, cfg.fmax_hz);
    let window: Vec<f64> = (0..frame_len)
        .map(|i| {
            0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (frame_len - 1).max(1) as f64).cos()
        })
        .collect();

    let samples = clip.samples();
    let n_frames = if samples.len() >= frame_len {
        1 + (samples.len() - frame_len) / hop
    } else {
        1
    };

    let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(n_frames);
    let mut energies = Vec::with_capacity(n_frames);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    for t in 0..n_frames {
        let start = t * hop;
        let mut energy = 0.0;
        for (i, slot) in buf.iter_mut().enumerate() {
            let s = if i < frame_len {
                samples.get(start + i).copied().unwrap_or(0.0)
            } else {
                0.0
            };
            if i < frame_len {
                energy += s * s;
            }
            *slot = Complex::new(if i < frame_len { s * window[i] } else { 0.0 }, 0.0);
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..=n_fft / 2].iter().map(|c| c.norm_sqr()).collect();
        let log_mel: Vec<f64> = filters
            .iter()
            .map(|taps| {
                let e: f64 = taps.iter().map(|&(b, w)| power[b] * w).sum();
                (e + 1e-10).ln()
            })
            .collect();
        coeffs.push(dct_ii_no_c0(&log_mel, cfg.n_coeffs));
        energies.push(energy / frame_len as f64);
    }

    // Deltas via central differences with clamped edges.
    let mut frames = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let prev = &coeffs[t.saturating_sub(1)];
        let next = &coeffs[(t + 1).min(n_frames - 1)];
        let mut v = coeffs[t].clone();
        v.extend(prev.iter().zip(next).map(|(p, n)| (n - p) / 2.0));
        frames.push(v);
    }
    FrameFeatures { frames, energies }
}

/// DCT-II with orthonormal scaling, keeping coefficients 1..=n_out. The
/// zeroth coefficient is overall log level; skipping it makes the features
/// level-invariant, which keeps speaker-loudness spread out of the
/// templates.
fn dct_ii_no_c0(x: &[f64], n_out: usize) -> Vec<f64> {
    let n = x.len();
    let scale = (2.0 / n as f64).sqrt();
    (1..=n_out.min(n.saturating_sub(1)))
        .map(|k| {
            let sum: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    v * (std::f64::consts::PI / n as f64 * (i as f64 + 0.5) * k as f64).cos()
                })
                .sum();
            sum * scale
        })
        .collect()
}
