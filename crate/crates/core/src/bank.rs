//! Phoneme clip bank: short speech snippets cut at random from a corpus of
//! recordings, later injected into carriers as perturbation seeds.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{load_wav, resample, save_wav, AudioClip, AudioError, CANONICAL_RATE};

pub const DEFAULT_MIN_MS: f64 = 50.0;
pub const DEFAULT_MAX_MS: f64 = 300.0;
pub const DEFAULT_TRIM_DB: f64 = -40.0;

#[derive(Debug, Error)]
pub enum BankError {
    #[error("input is entirely below the silence threshold")]
    SilentInput,
    #[error("no usable audio files in corpus")]
    EmptyCorpus,
    #[error("cut {built} of {requested} clips before the retry budget ran out")]
    RetryBudget { built: usize, requested: usize },
    #[error("malformed bank: {0}")]
    Format(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One bank entry. `source_id` records provenance as `<relative path>#<start sample>`.
#[derive(Debug, Clone)]
pub struct PhonemeClip {
    pub audio: AudioClip,
    pub source_id: String,
    pub duration_ms: f64,
}

#[derive(Debug, Clone)]
pub struct PhonemeBank {
    clips: Vec<PhonemeClip>,
    sample_rate: u32,
    seed: u64,
}

impl PhonemeBank {
    /// Invariants: non-empty, one sample rate, every clip inside the
    /// duration bounds its builder enforced.
    fn new(clips: Vec<PhonemeClip>, sample_rate: u32, seed: u64) -> Result<PhonemeBank, BankError> {
        if clips.is_empty() {
            return Err(BankError::EmptyCorpus);
        }
        for c in &clips {
            if c.audio.sample_rate() != sample_rate {
                return Err(BankError::Format(format!(
                    "clip {} is at {} Hz, bank is {} Hz",
                    c.source_id,
                    c.audio.sample_rate(),
                    sample_rate
                )));
            }
        }
        Ok(PhonemeBank { clips, sample_rate, seed })
    }

    pub fn clips(&self) -> &[PhonemeClip] {
        &self.clips
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw over the bank. Deterministic for a given rng state.
    pub fn sample<'a>(&'a self, rng: &mut impl Rng) -> &'a PhonemeClip {
        &self.clips[rng.gen_range(0..self.clips.len())]
    }
}

/// Free-function alias for [`PhonemeBank::sample`].
pub fn sample_phoneme<'a>(bank: &'a PhonemeBank, rng: &mut impl Rng) -> &'a PhonemeClip {
    bank.sample(rng)
}

#[derive(Debug, Clone)]
pub struct BankConfig {
    pub n_clips: usize,
    pub min_ms: f64,
    pub max_ms: f64,
    /// Silence threshold in dB relative to clip peak.
    pub trim_threshold_db: f64,
    pub seed: u64,
}

impl Default for BankConfig {
    fn default() -> BankConfig {
        BankConfig {
            n_clips: 453,
            min_ms: DEFAULT_MIN_MS,
            max_ms: DEFAULT_MAX_MS,
            trim_threshold_db: DEFAULT_TRIM_DB,
            seed: 0,
        }
    }
}

/// Strips leading and trailing 20 ms windows whose RMS falls below
/// `threshold_db` relative to the clip's peak.
pub fn trim_silence(clip: &AudioClip, threshold_db: f64) -> Result<AudioClip, BankError> {
    let samples = clip.samples();
    let peak = samples.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if peak <= 0.0 {
        return Err(BankError::SilentInput);
    }
    let thresh = peak * 10.0f64.powf(threshold_db / 20.0);
    let win = ((clip.sample_rate() as f64 * 0.020) as usize).max(1);
    let n_windows = samples.len().div_ceil(win);
    let window_loud = |w: usize| {
        let lo = w * win;
        let hi = ((w + 1) * win).min(samples.len());
        crate::dsp::rms(&samples[lo..hi]) >= thresh
    };
    let first = (0..n_windows).find(|&w| window_loud(w)).ok_or(BankError::SilentInput)?;
    let last = (0..n_windows).rev().find(|&w| window_loud(w)).expect("first loud window exists");
    let lo = first * win;
    let hi = ((last + 1) * win).min(samples.len());
    Ok(AudioClip::new(samples[lo..hi].to_vec(), clip.sample_rate())?)
}

/// Builds a bank by repeatedly picking a random corpus file, trimming edge
/// silence, and cutting a random window with duration uniform in
/// `[min_ms, max_ms]`. Deterministic for a fixed corpus and seed. Files too
/// short after trimming are skipped; the retry budget is 20 draws per
/// requested clip.
pub fn build_bank(corpus_dir: impl AsRef<Path>, cfg: &BankConfig) -> Result<PhonemeBank, BankError> {
    let corpus_dir = corpus_dir.as_ref();
    if cfg.n_clips == 0 || cfg.min_ms <= 0.0 || cfg.max_ms < cfg.min_ms {
        return Err(BankError::Format(format!(
            "bad bank config: n_clips={} min_ms={} max_ms={}",
            cfg.n_clips, cfg.min_ms, cfg.max_ms
        )));
    }
    let files = corpus_files(corpus_dir)?;
    if files.is_empty() {
        return Err(BankError::EmptyCorpus);
    }

    let rate = CANONICAL_RATE;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut clips: Vec<PhonemeClip> = Vec::with_capacity(cfg.n_clips);
    // Trimmed sources are cached so a draw never re-reads the file; None
    // marks a file that failed to load or trimmed away entirely.
    let mut cache: HashMap<usize, Option<AudioClip>> = HashMap::new();
    let budget = cfg.n_clips.saturating_mul(20);
    let mut attempts = 0usize;

    let min_samples = (cfg.min_ms / 1_000.0 * rate as f64).round() as usize;
    while clips.len() < cfg.n_clips {
        attempts += 1;
        if attempts > budget {
            return if clips.is_empty() {
                Err(BankError::EmptyCorpus)
            } else {
                Err(BankError::RetryBudget { built: clips.len(), requested: cfg.n_clips })
            };
        }
        let fi = rng.gen_range(0..files.len());
        let trimmed = cache.entry(fi).or_insert_with(|| {
            load_wav(corpus_dir.join(&files[fi]))
                .ok()
                .and_then(|c| if c.sample_rate() == rate { Some(c) } else { resample(&c, rate).ok() })
                .and_then(|c| trim_silence(&c, cfg.trim_threshold_db).ok())
        });
        let Some(source) = trimmed else { continue };
        if source.len() < min_samples {
            continue;
        }
        let avail_ms = source.duration_seconds() * 1_000.0;
        let dur_ms = rng.gen_range(cfg.min_ms..=cfg.max_ms).min(avail_ms);
        let dur_samples = ((dur_ms / 1_000.0 * rate as f64).round() as usize)
            .clamp(min_samples, source.len());
        let start = rng.gen_range(0..=source.len() - dur_samples);
        let window = AudioClip::new(
            source.samples()[start..start + dur_samples].to_vec(),
            rate,
        )?;
        // Re-trim so the cut itself carries no silent edges; a window that
        // loses too much is rejected and redrawn.
        let Ok(cut) = trim_silence(&window, cfg.trim_threshold_db) else { continue };
        if cut.len() < min_samples {
            continue;
        }
        let duration_ms = cut.duration_seconds() * 1_000.0;
        clips.push(PhonemeClip {
            audio: cut,
            source_id: format!("{}#{start}", files[fi].display()),
            duration_ms,
        });
    }
    PhonemeBank::new(clips, rate, cfg.seed)
}

/// File set for a corpus directory: `manifest.txt` (one relative path per
/// line) when present, else a recursive walk for `.wav` files. Sorted by
/// path either way.
fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, BankError> {
    let manifest = dir.join("manifest.txt");
    let mut files = if manifest.is_file() {
        fs::read_to_string(&manifest)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(PathBuf::from)
            .collect::<Vec<_>>()
    } else {
        let mut found = Vec::new();
        walk_wavs(dir, dir, &mut found)?;
        found
    };
    files.sort();
    files.dedup();
    Ok(files)
}

fn walk_wavs(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            walk_wavs(root, &path, out)?;
        } else if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        {
            out.push(path.strip_prefix(root).expect("walk stays under root").to_path_buf());
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct BankMeta {
    seed: u64,
    sample_rate: u32,
    clips: Vec<ClipMeta>,
}

#[derive(Serialize, Deserialize)]
struct ClipMeta {
    wav: String,
    source_id: String,
    duration_ms: f64,
}

/// Writes `dir/bank.json` plus `dir/clips/NNN.wav` for each entry.
pub fn save_bank(bank: &PhonemeBank, dir: impl AsRef<Path>) -> Result<(), BankError> {
    let dir = dir.as_ref();
    let clip_dir = dir.join("clips");
    fs::create_dir_all(&clip_dir)?;
    let mut metas = Vec::with_capacity(bank.len());
    for (i, clip) in bank.clips().iter().enumerate() {
        let rel = format!("clips/{i:04}.wav");
        save_wav(&clip.audio, dir.join(&rel))?;
        metas.push(ClipMeta {
            wav: rel,
            source_id: clip.source_id.clone(),
            duration_ms: clip.duration_ms,
        });
    }
    let meta = BankMeta { seed: bank.seed(), sample_rate: bank.sample_rate(), clips: metas };
    let json = serde_json::to_string_pretty(&meta)
        .map_err(|e| BankError::Format(e.to_string()))?;
    fs::write(dir.join("bank.json"), json)?;
    Ok(())
}

pub fn load_bank(dir: impl AsRef<Path>) -> Result<PhonemeBank, BankError> {
    let dir = dir.as_ref();
    let raw = fs::read_to_string(dir.join("bank.json"))?;
    let meta: BankMeta =
        serde_json::from_str(&raw).map_err(|e| BankError::Format(e.to_string()))?;
    let mut clips = Vec::with_capacity(meta.clips.len());
    for cm in meta.clips {
        let audio = load_wav(dir.join(&cm.wav))?;
        clips.push(PhonemeClip { audio, source_id: cm.source_id, duration_ms: cm.duration_ms });
    }
    PhonemeBank::new(clips, meta.sample_rate, meta.seed)
}
