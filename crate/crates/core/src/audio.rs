//! Waveform container, WAV I/O, resampling, mixing, and the distortion
//! metric used everywhere else in the toolkit.
//!
//! All amplitudes live on the unit scale [-1, +1]; 16-bit PCM maps to that
//! range by division by 32768. The squared-l2 distortion metric is computed
//! on this scale.

use std::io;
use std::path::Path;

use thiserror::Error;

use crate::dsp;

/// Canonical sample rate for oracle submissions.
pub const CANONICAL_RATE: u32 = 16_000;

/// Number of taps per phase in the windowed-sinc resampling kernel.
const RESAMPLE_TAPS: usize = 64;
/// Kaiser window shape parameter for the resampling kernel (~80 dB stopband).
const RESAMPLE_KAISER_BETA: f64 = 10.0;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("unreadable or malformed wav: {0}")]
    Format(String),
    #[error("unsupported wav encoding: {0}")]
    UnsupportedFormat(String),
    #[error("sample rate mismatch: carrier {carrier} Hz, delta {delta} Hz")]
    RateMismatch { carrier: u32, delta: u32 },
    #[error("invalid band edges: low {low} Hz, high {high} Hz at {rate} Hz")]
    BandError { low: f64, high: f64, rate: u32 },
    #[error("invalid sample rate: {0} Hz")]
    InvalidRate(u32),
    #[error("empty clip")]
    Empty,
    #[error("sample out of range at index {index}: {value}")]
    OutOfRange { index: usize, value: f64 },
}

/// A mono waveform. Invariants: at least one sample, a positive sample
/// rate, and every sample within [-1.0, +1.0].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    /// Builds a clip, validating the container invariants.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<AudioClip, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidRate(0));
        }
        if samples.is_empty() {
            return Err(AudioError::Empty);
        }
        for (index, &value) in samples.iter().enumerate() {
            if !value.is_finite() || value.abs() > 1.0 {
                return Err(AudioError::OutOfRange { index, value });
            }
        }
        Ok(AudioClip { samples, sample_rate })
    }

    /// Builds a clip from filter or mix output that may overshoot the unit
    /// range; overshoot is hard-clipped.
    pub fn from_unclamped(samples: Vec<f64>, sample_rate: u32) -> Result<AudioClip, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidRate(0));
        }
        if samples.is_empty() {
            return Err(AudioError::Empty);
        }
        let clamped = samples
            .into_iter()
            .map(|v| if v.is_finite() { v.clamp(-1.0, 1.0) } else { 0.0 })
            .collect();
        Ok(AudioClip { samples: clamped, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Root-mean-square amplitude.
    pub fn rms(&self) -> f64 {
        dsp::rms(&self.samples)
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// A perturbation waveform plus the sample offset at which it is inserted
/// into a carrier.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub delta: AudioClip,
    pub offset_samples: usize,
}

impl Perturbation {
    pub fn new(delta: AudioClip, offset_samples: usize) -> Perturbation {
        Perturbation { delta, offset_samples }
    }
}

/// Loads a 16-bit PCM WAV as a mono unit-scale clip; multi-channel input is
/// averaged across channels.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let reader = hound::WavReader::open(path.as_ref()).map_err(map_hound_err)?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(AudioError::UnsupportedFormat(format!(
            "{:?} {}-bit; only 16-bit integer PCM is supported",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(AudioError::Format("zero channels".into()));
    }
    let raw: Vec<i16> = reader
        .into_samples::<i16>()
        .collect::<Result<_, _>>()
        .map_err(map_hound_err)?;
    let frames = raw.len() / channels;
    if frames == 0 {
        return Err(AudioError::Empty);
    }
    let mut mono = Vec::with_capacity(frames);
    for f in 0..frames {
        let sum: f64 = raw[f * channels..(f + 1) * channels]
            .iter()
            .map(|&s| s as f64)
            .sum();
        mono.push(sum / channels as f64 / 32_768.0);
    }
    AudioClip::new(mono, spec.sample_rate)
}

fn map_hound_err(e: hound::Error) -> AudioError {
    match e {
        hound::Error::IoError(io) => AudioError::Io(io),
        other => AudioError::Format(other.to_string()),
    }
}

/// Writes a clip as 16-bit PCM mono WAV. Round-trips within one
/// quantization step (1/32768).
pub fn save_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec).map_err(map_hound_err)?;
    for &s in &clip.samples {
        let q = (s * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16;
        writer.write_sample(q).map_err(map_hound_err)?;
    }
    writer.finalize().map_err(map_hound_err)
}

/// Resamples with a Kaiser-windowed sinc kernel, 64 taps per phase. Same
/// target rate returns the input unchanged.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::InvalidRate(0));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let src = clip.sample_rate as f64;
    let dst = target_rate as f64;
    let n_in = clip.samples.len();
    let n_out = ((n_in as f64 * dst / src).round() as usize).max(1);

    // When downsampling the kernel is stretched so its cutoff sits at the
    // target Nyquist.
    let stretch = (src / dst).max(1.0);
    let cutoff = 0.5 / stretch;
    let half_width = (RESAMPLE_TAPS / 2) as f64 * stretch;

    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out {
        let center = n as f64 * src / dst;
        let k_lo = ((center - half_width).ceil() as isize).max(0) as usize;
        let k_hi = ((center + half_width).floor() as isize).min(n_in as isize - 1) as usize;
        let mut num = 0.0;
        let mut den = 0.0;
        for k in k_lo..=k_hi {
            let t = k as f64 - center;
            let w = dsp::sinc(2.0 * cutoff * t) * dsp::kaiser(t / half_width, RESAMPLE_KAISER_BETA);
            num += clip.samples[k] * w;
            den += w;
        }
        out.push(if den.abs() > 1e-12 { num / den } else { 0.0 });
    }
    AudioClip::from_unclamped(out, target_rate)
}

/// Adds `pert.delta` into `carrier` starting at `pert.offset_samples`.
/// Output length equals the carrier length; any part of the delta past the
/// carrier end is dropped; sums are hard-clipped to [-1, +1]. A delta placed
/// entirely past the end is a no-op.
pub fn mix_at(carrier: &AudioClip, pert: &Perturbation) -> Result<AudioClip, AudioError> {
    if carrier.sample_rate != pert.delta.sample_rate {
        return Err(AudioError::RateMismatch {
            carrier: carrier.sample_rate,
            delta: pert.delta.sample_rate,
        });
    }
    let mut out = carrier.samples.clone();
    for (i, &d) in pert.delta.samples.iter().enumerate() {
        let Some(slot) = pert.offset_samples.checked_add(i) else { break };
        if slot >= out.len() {
            break;
        }
        out[slot] = (out[slot] + d).clamp(-1.0, 1.0);
    }
    // Clipping keeps values in range, so the validating constructor holds.
    AudioClip::new(out, carrier.sample_rate)
}

/// Squared l2 distortion of a perturbation: the sum of squared unit-scale
/// amplitudes of its delta waveform.
pub fn l2_distortion(pert: &Perturbation) -> f64 {
    pert.delta.samples.iter().map(|d| d * d).sum()
}

/// Band-pass filters the clip (high-pass at `low_hz` cascaded with low-pass
/// at `high_hz`), zero phase via a forward-backward pass. A high edge at
/// Nyquist disables the low-pass stage.
pub fn band_limit(clip: &AudioClip, low_hz: f64, high_hz: f64) -> Result<AudioClip, AudioError> {
    let nyquist = clip.sample_rate as f64 / 2.0;
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz <= nyquist) {
        return Err(AudioError::BandError {
            low: low_hz,
            high: high_hz,
            rate: clip.sample_rate,
        });
    }
    let fs = clip.sample_rate as f64;
    let mut sections = dsp::butterworth_highpass(low_hz, fs, 2);
    if high_hz < nyquist * 0.999 {
        sections.extend(dsp::butterworth_lowpass(high_hz, fs, 2));
    }
    let filtered = dsp::filtfilt(&sections, &clip.samples);
    AudioClip::from_unclamped(filtered, clip.sample_rate)
}

/// Pure sine tone, handy for measurement-style tests and demos.
pub fn tone(freq_hz: f64, seconds: f64, amplitude: f64, sample_rate: u32) -> AudioClip {
    let n = ((seconds * sample_rate as f64).round() as usize).max(1);
    let samples = (0..n)
        .map(|i| {
            amplitude * (2.0 * std::f64::consts::PI * freq_hz * i as f64 / sample_rate as f64).sin()
        })
        .collect();
    AudioClip::from_unclamped(samples, sample_rate).expect("tone is non-empty")
}
