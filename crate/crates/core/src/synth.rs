//! Deterministic formant-style synthesizer for a small spoken-command
//! vocabulary. Stands in for a recorded speech-command corpus in tests,
//! benchmarks, and demos: every utterance is built from a per-word segment
//! recipe with per-utterance voice variation (pitch, formant scale, tempo,
//! level, noise).

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::audio::{save_wav, AudioClip, CANONICAL_RATE};
use crate::dsp::Biquad;
use crate::oracle::surrogate::LabeledClip;

/// Built-in ten-word command vocabulary.
pub const VOCAB: [&str; 10] = [
    "yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go",
];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub sample_rate: u32,
    pub words: Vec<String>,
    pub utterances_per_word: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> SynthConfig {
        SynthConfig {
            sample_rate: CANONICAL_RATE,
            words: VOCAB.iter().map(|w| w.to_string()).collect(),
            utterances_per_word: 50,
            seed: 0,
        }
    }
}

/// One acoustic segment of a word recipe.
enum Seg {
    /// Voiced portion: three formant partials, amplitude-modulated at the
    /// speaker's pitch. Formants may glide between start and end values.
    Voiced { f: [f64; 3], f_end: Option<[f64; 3]>, amps: [f64; 3], ms: f64 },
    /// Fricative or burst: band-passed noise around a center frequency.
    Noise { center_hz: f64, q: f64, amp: f64, ms: f64 },
    /// Stop gap.
    Gap { ms: f64 },
}

use Seg::{Gap, Noise, Voiced};

// Each word is carried by one sustained vowel-like core with a
// word-specific formant stack, plus at most a short onset or coda. Any
// 50-300 ms window of an utterance then shares the whole word's spectral
// statistics, which is what makes short cut-outs of these words useful
// injection material.
//
// All the cores live in the same 300-1700 Hz region, the way real vowels
// share the formant band. Words are separated by the f2/f1 ratio (immune to
// the per-voice common formant scale) and by the absolute f1 rung; louder
// audio therefore masks quieter audio inside the shared band instead of the
// two words occupying disjoint spectral islands.
fn recipe(word: &str) -> Vec<Seg> {
    match word {
        "yes" => vec![
            Voiced { f: [350.0, 1_120.0, 2_900.0], f_end: Some([370.0, 1_090.0, 2_850.0]), amps: [1.0, 0.8, 0.25], ms: 260.0 },
            Noise { center_hz: 6_000.0, q: 2.0, amp: 0.30, ms: 50.0 },
        ],
        "no" => vec![
            Voiced { f: [480.0, 816.0, 2_250.0], f_end: Some([465.0, 790.0, 2_220.0]), amps: [1.0, 0.6, 0.15], ms: 300.0 },
        ],
        "up" => vec![
            Voiced { f: [650.0, 1_365.0, 2_500.0], f_end: None, amps: [1.0, 0.75, 0.2], ms: 240.0 },
            Gap { ms: 30.0 },
            Noise { center_hz: 1_200.0, q: 1.0, amp: 0.35, ms: 20.0 },
        ],
        "down" => vec![
            Voiced { f: [650.0, 1_690.0, 2_700.0], f_end: Some([590.0, 1_640.0, 2_650.0]), amps: [1.0, 0.85, 0.25], ms: 310.0 },
        ],
        "left" => vec![
            Voiced { f: [350.0, 1_400.0, 2_600.0], f_end: None, amps: [0.95, 0.85, 0.3], ms: 250.0 },
            Noise { center_hz: 5_000.0, q: 1.2, amp: 0.28, ms: 50.0 },
        ],
        "right" => vec![
            Voiced { f: [480.0, 1_008.0, 1_500.0], f_end: Some([480.0, 1_010.0, 1_450.0]), amps: [1.0, 0.7, 0.55], ms: 300.0 },
        ],
        "on" => vec![
            Voiced { f: [650.0, 1_105.0, 2_350.0], f_end: None, amps: [1.0, 0.8, 0.12], ms: 270.0 },
        ],
        "off" => vec![
            Voiced { f: [480.0, 1_248.0, 2_550.0], f_end: None, amps: [1.0, 0.55, 0.18], ms: 250.0 },
            Noise { center_hz: 4_800.0, q: 1.0, amp: 0.32, ms: 55.0 },
        ],
        "stop" => vec![
            Noise { center_hz: 6_500.0, q: 2.0, amp: 0.40, ms: 55.0 },
            Voiced { f: [350.0, 735.0, 2_520.0], f_end: None, amps: [1.0, 0.8, 0.2], ms: 280.0 },
        ],
        "go" => vec![
            Noise { center_hz: 2_500.0, q: 1.5, amp: 0.45, ms: 18.0 },
            Voiced { f: [350.0, 880.0, 2_050.0], f_end: Some([350.0, 950.0, 2_050.0]), amps: [1.0, 0.7, 0.15], ms: 290.0 },
        ],
        other => panic!("no recipe for word {other:?}"),
    }
}

struct Voice {
    f0: f64,
    formant_scale: f64,
    tempo: f64,
    level: f64,
    noise_floor: f64,
}

impl Voice {
    fn draw(rng: &mut impl Rng) -> Voice {
        Voice {
            f0: rng.gen_range(95.0..230.0),
            formant_scale: rng.gen_range(0.94..1.06),
            tempo: rng.gen_range(0.85..1.20),
            // Wide level spread: speakers at very different distances from
            // the microphone, which real command corpora show.
            level: rng.gen_range(0.15..0.60),
            // Room-tone floor. Kept high enough that spectral valleys
            // between formants are set by the recording chain, not by the
            // synthesizer's numerical silence.
            noise_floor: rng.gen_range(0.010..0.022),
        }
    }
}

/// Raised-cosine attack/release envelope.
fn envelope(n: usize, ramp: usize, i: usize) -> f64 {
    let ramp = ramp.min(n / 2).max(1);
    if i < ramp {
        0.5 - 0.5 * (std::f64::consts::PI * i as f64 / ramp as f64).cos()
    } else if i + ramp > n {
        let j = n - i;
        0.5 - 0.5 * (std::f64::consts::PI * j as f64 / ramp as f64).cos()
    } else {
        1.0
    }
}

fn render_voiced(
    out: &mut Vec<f64>,
    rate: f64,
    voice: &Voice,
    f: [f64; 3],
    f_end: Option<[f64; 3]>,
    amps: [f64; 3],
    ms: f64,
    rng: &mut impl Rng,
) {
    let n = ((ms / 1_000.0 * voice.tempo * rate) as usize).max(8);
    let ramp = (0.008 * rate) as usize;
    let f_end = f_end.unwrap_or(f);
    let phases: [f64; 3] = [
        rng.gen_range(0.0..std::f64::consts::TAU),
        rng.gen_range(0.0..std::f64::consts::TAU),
        rng.gen_range(0.0..std::f64::consts::TAU),
    ];
    let mut acc = phases;
    for i in 0..n {
        let frac = i as f64 / n as f64;
        let mut s = 0.0;
        for k in 0..3 {
            let fk = (f[k] + (f_end[k] - f[k]) * frac) * voice.formant_scale;
            acc[k] += std::f64::consts::TAU * fk / rate;
            s += amps[k] * acc[k].sin();
        }
        // Pitch buzz: amplitude modulation at the speaker's f0.
        let buzz = (1.0 + 0.35 * (std::f64::consts::TAU * voice.f0 * i as f64 / rate).sin()) / 1.35;
        out.push(s * buzz * envelope(n, ramp, i));
    }
}

fn render_noise(
    out: &mut Vec<f64>,
    rate: f64,
    voice: &Voice,
    center_hz: f64,
    q: f64,
    amp: f64,
    ms: f64,
    rng: &mut impl Rng,
) {
    let n = ((ms / 1_000.0 * voice.tempo * rate) as usize).max(8);
    let ramp = (0.004 * rate) as usize;
    let white: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let section = Biquad::bandpass(center_hz * voice.formant_scale, rate, q);
    let shaped = section.run(&white);
    // Band-passed noise loses power; renormalize before applying the
    // segment amplitude.
    let r = crate::dsp::rms(&shaped).max(1e-9);
    for (i, v) in shaped.into_iter().enumerate() {
        out.push(v / r * 0.5 * amp * envelope(n, ramp, i));
    }
}

/// Synthesizes one utterance of `word` with a voice drawn from `rng`.
pub fn synth_utterance(word: &str, sample_rate: u32, rng: &mut impl Rng) -> AudioClip {
    let rate = sample_rate as f64;
    let voice = Voice::draw(rng);
    let mut signal: Vec<f64> = Vec::new();

    let lead = (rng.gen_range(0.030..0.060) * rate) as usize;
    signal.extend(std::iter::repeat(0.0).take(lead));
    for seg in recipe(word) {
        match seg {
            Voiced { f, f_end, amps, ms } => {
                render_voiced(&mut signal, rate, &voice, f, f_end, amps, ms, rng)
            }
            Noise { center_hz, q, amp, ms } => {
                render_noise(&mut signal, rate, &voice, center_hz, q, amp, ms, rng)
            }
            Gap { ms } => {
                let n = ((ms / 1_000.0 * voice.tempo * rate) as usize).max(1);
                signal.extend(std::iter::repeat(0.0).take(n));
            }
        }
    }
    let tail = (rng.gen_range(0.030..0.060) * rate) as usize;
    signal.extend(std::iter::repeat(0.0).take(tail));

    // Peak-normalize, apply the utterance level, add the noise floor.
    let peak = signal.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-9);
    for v in &mut signal {
        *v = *v / peak * voice.level + rng.gen_range(-1.0..1.0) * voice.noise_floor;
    }
    AudioClip::from_unclamped(signal, sample_rate).expect("utterance is non-empty")
}

/// In-memory labeled corpus, deterministic for a fixed config.
pub fn synth_labeled_corpus(cfg: &SynthConfig) -> Vec<LabeledClip> {
    let mut out = Vec::with_capacity(cfg.words.len() * cfg.utterances_per_word);
    for (wi, word) in cfg.words.iter().enumerate() {
        for u in 0..cfg.utterances_per_word {
            // Independent stream per utterance so corpora of different sizes
            // share their common prefix.
            let mut rng = utterance_rng(cfg.seed, wi, u);
            out.push(LabeledClip {
                label: word.clone(),
                clip: synth_utterance(word, cfg.sample_rate, &mut rng),
            });
        }
    }
    out
}

fn utterance_rng(seed: u64, word_index: usize, utterance: usize) -> ChaCha20Rng {
    let mut root = ChaCha20Rng::seed_from_u64(seed);
    // Burn a stream-distinguishing prefix derived from the indices.
    let mix = seed
        ^ (word_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (utterance as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    root.set_stream(word_index as u64 * 1_000_003 + utterance as u64);
    let _ = root.next_u64();
    ChaCha20Rng::seed_from_u64(root.next_u64() ^ mix)
}

/// Writes a corpus as `dir/<word>/<word>_NNN.wav` plus a `manifest.txt`
/// listing relative paths, one per line, sorted.
pub fn synth_corpus_to_dir(dir: impl AsRef<Path>, cfg: &SynthConfig) -> std::io::Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut rel_paths = Vec::new();
    for (wi, word) in cfg.words.iter().enumerate() {
        let word_dir = dir.join(word);
        fs::create_dir_all(&word_dir)?;
        for u in 0..cfg.utterances_per_word {
            let mut rng = utterance_rng(cfg.seed, wi, u);
            let clip = synth_utterance(word, cfg.sample_rate, &mut rng);
            let rel = PathBuf::from(word).join(format!("{word}_{u:03}.wav"));
            save_wav(&clip, dir.join(&rel))
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e.to_string()))?;
            rel_paths.push(rel);
        }
    }
    rel_paths.sort();
    let manifest: String = rel_paths
        .iter()
        .map(|p| format!("{}\n", p.display()))
        .collect();
    fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(rel_paths)
}
