//! Benchmark harness: runs a list of attack tasks with per-task derived
//! seeds, maps domain-level failures into honest failed rows, and bundles
//! everything into deterministic result documents plus a report.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::attack::{craft, mismatch_sweep, AttackConfig, AttackError, AttackResult};
use crate::audio::{save_wav, AudioClip, AudioError, Perturbation};
use crate::bank::PhonemeBank;
use crate::defense::AdversarialExample;
use crate::distance::AttackGoal;
use crate::oracle::{Oracle, QueryLedger, QuerySession, Transcript};
use crate::report::{Report, ReportError, ResultDoc, RunRecord};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no attack tasks given")]
    NoTasks,
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One carrier to attack. `command` is the reference transcription of the
/// carrier; `target` switches the task to targeted mode.
#[derive(Debug, Clone)]
pub struct AttackTask {
    pub command: String,
    pub carrier: AudioClip,
    pub target: Option<String>,
}

impl AttackTask {
    pub fn goal(&self) -> AttackGoal {
        match &self.target {
            Some(t) => AttackGoal::targeted(&self.command, t),
            None => AttackGoal::untargeted(&self.command),
        }
    }
}

/// One finished task: the serializable document plus the raw perturbation
/// (absent when the attack failed before producing one).
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub doc: ResultDoc,
    pub perturbation: Option<Perturbation>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub runs: Vec<BenchmarkRun>,
    pub report: Report,
    /// Wall time per task, same order as `runs`. Kept out of the documents
    /// and the report so those stay byte-deterministic.
    pub timings_ms: Vec<f64>,
}

/// Runs one attack task with the given seed, folding carrier rejection and
/// initialization exhaustion into failed rows (query spend preserved; every
/// query in those phases is one carrier-length clip, which makes the audio
/// seconds exact) instead of aborting the benchmark.
pub fn run_attack_task(
    oracle: &dyn Oracle,
    bank: &PhonemeBank,
    task: &AttackTask,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<BenchmarkRun, HarnessError> {
    let goal = task.goal();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    match craft(oracle, &task.carrier, &goal, bank, cfg, &mut rng) {
        Ok(result) => {
            let mut doc = ResultDoc::new(&task.command, &goal, seed, &result);
            doc.perturbation_wav = None;
            Ok(BenchmarkRun { doc, perturbation: Some(result.perturbation) })
        }
        Err(AttackError::BadCarrier { got, .. }) => {
            Ok(failed_run(task, seed, 1, got, task.carrier.duration_seconds()))
        }
        Err(AttackError::InitFailed { queries, .. }) => {
            let secs = queries as f64 * task.carrier.duration_seconds();
            Ok(failed_run(task, seed, queries, Transcript::Text(task.command.clone()), secs))
        }
        Err(e) => Err(e.into()),
    }
}

fn failed_run(
    task: &AttackTask,
    seed: u64,
    queries: u64,
    final_transcript: Transcript,
    audio_seconds: f64,
) -> BenchmarkRun {
    let ledger = QueryLedger {
        total_queries: queries,
        total_audio_seconds: audio_seconds,
        init_queries: queries,
        ..QueryLedger::default()
    };
    let doc = ResultDoc {
        schema: crate::report::RESULT_SCHEMA.to_string(),
        command: task.command.clone(),
        target: task.target.clone(),
        seed,
        success: false,
        final_transcript,
        l2: 0.0,
        ledger,
        trace: Vec::new(),
        components: Vec::new(),
        perturbation_wav: None,
        perturbation_offset_samples: 0,
        carrier_wav: None,
    };
    BenchmarkRun { doc, perturbation: None }
}

/// Runs every task with seed `seed + index` and aggregates a report.
pub fn run_benchmark(
    oracle: &dyn Oracle,
    bank: &PhonemeBank,
    tasks: &[AttackTask],
    cfg: &AttackConfig,
    seed: u64,
    rate_per_minute: f64,
) -> Result<BenchmarkOutcome, HarnessError> {
    if tasks.is_empty() {
        return Err(HarnessError::NoTasks);
    }
    let mut runs = Vec::with_capacity(tasks.len());
    let mut timings_ms = Vec::with_capacity(tasks.len());
    for (index, task) in tasks.iter().enumerate() {
        let started = Instant::now();
        let run = run_attack_task(oracle, bank, task, cfg, seed.wrapping_add(index as u64))?;
        timings_ms.push(started.elapsed().as_secs_f64() * 1_000.0);
        runs.push(run);
    }
    let rows: Vec<RunRecord> = runs.iter().map(|r| RunRecord::from_result_doc(&r.doc)).collect();
    let report = Report::new(rows, rate_per_minute)?;
    Ok(BenchmarkOutcome { runs, report, timings_ms })
}

/// Replays crafted examples at each playback delay and aggregates the
/// success rate per delay. Rows come back in the given delay order.
pub fn delay_sweep(
    oracle: &dyn Oracle,
    examples: &[(AttackTask, AttackResult)],
    delays_ms: &[u32],
    cfg: &AttackConfig,
) -> Result<Vec<(u32, f64)>, HarnessError> {
    let mut hits = vec![0usize; delays_ms.len()];
    for (task, result) in examples {
        let session = QuerySession::new(oracle);
        let curve = mismatch_sweep(&session, &task.carrier, result, &task.goal(), delays_ms, cfg)?;
        for (slot, (_, held)) in curve.iter().enumerate() {
            if *held {
                hits[slot] += 1;
            }
        }
    }
    let n = examples.len().max(1) as f64;
    Ok(delays_ms
        .iter()
        .zip(hits)
        .map(|(&d, h)| (d, h as f64 / n))
        .collect())
}

/// Bundles successful benchmark runs with their tasks for defense
/// evaluation. Runs without a perturbation are skipped.
pub fn adversarial_examples(
    tasks: &[AttackTask],
    outcome: &BenchmarkOutcome,
) -> Vec<AdversarialExample> {
    tasks
        .iter()
        .zip(&outcome.runs)
        .filter_map(|(task, run)| {
            let pert = run.perturbation.clone()?;
            Some(AdversarialExample {
                carrier: task.carrier.clone(),
                goal: task.goal(),
                result: AttackResult {
                    perturbation: pert,
                    final_transcript: run.doc.final_transcript.clone(),
                    success: run.doc.success,
                    ledger: run.doc.ledger.clone(),
                    l2: run.doc.l2,
                    trace: run.doc.trace.clone(),
                    components: run.doc.components.clone(),
                },
            })
        })
        .collect()
}

/// Writes per-run result JSON (with a WAV sidecar for each perturbation),
/// report.json, report.csv, and timings.csv under `dir`.
pub fn save_outcome(
    outcome: &BenchmarkOutcome,
    tasks: &[AttackTask],
    dir: &Path,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    for (index, run) in outcome.runs.iter().enumerate() {
        let stem = format!("{index:03}_{}", sanitize(&run.doc.command));
        let mut doc = run.doc.clone();
        if let Some(pert) = &run.perturbation {
            let wav_name = format!("{stem}.delta.wav");
            save_wav(&pert.delta, dir.join(&wav_name))?;
            doc.perturbation_wav = Some(wav_name);
            doc.perturbation_offset_samples = pert.offset_samples;
        }
        // Carrier sidecar makes the directory self-contained: defense and
        // timing sweeps can rebuild the adversarial waveform from it alone.
        if let Some(task) = tasks.get(index) {
            let wav_name = format!("{stem}.carrier.wav");
            save_wav(&task.carrier, dir.join(&wav_name))?;
            doc.carrier_wav = Some(wav_name);
        }
        if !doc.trace.is_empty() {
            let tsv = crate::report::trace_plot_tsv(&doc.trace);
            std::fs::write(dir.join(format!("{stem}.trace.tsv")), tsv)?;
        }
        std::fs::write(dir.join(format!("{stem}.json")), doc.to_json()?)?;
    }
    outcome.report.save(&dir.join("report.json"))?;
    std::fs::write(dir.join("report.csv"), outcome.report.csv())?;
    let mut timings = String::from("index,command,wall_time_ms\n");
    for (index, (run, ms)) in outcome.runs.iter().zip(&outcome.timings_ms).enumerate() {
        timings.push_str(&format!("{index},{},{ms}\n", run.doc.command));
    }
    std::fs::write(dir.join("timings.csv"), timings)?;
    Ok(())
}

/// Loads one saved result document back into an attackable (task, result)
/// pair; `Ok(None)` when the run never produced a perturbation (nothing to
/// replay). Sidecar WAVs resolve relative to the document's directory; a
/// missing carrier sidecar is an error, not a skip, so callers cannot
/// silently evaluate nothing.
pub fn load_saved_example(
    path: &Path,
) -> Result<Option<(AttackTask, AttackResult)>, HarnessError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let doc = ResultDoc::load(path)?;
    let Some(pert_wav) = &doc.perturbation_wav else {
        return Ok(None);
    };
    let carrier_wav = doc.carrier_wav.as_ref().ok_or_else(|| {
        ReportError::Inconsistent(format!("{} has no carrier sidecar", path.display()))
    })?;
    let carrier = crate::audio::load_wav(dir.join(carrier_wav))?;
    let delta = crate::audio::load_wav(dir.join(pert_wav))?;
    let task =
        AttackTask { command: doc.command.clone(), carrier, target: doc.target.clone() };
    let result = AttackResult {
        perturbation: Perturbation::new(delta, doc.perturbation_offset_samples),
        final_transcript: doc.final_transcript,
        success: doc.success,
        ledger: doc.ledger,
        l2: doc.l2,
        trace: doc.trace,
        components: doc.components,
    };
    Ok(Some((task, result)))
}

/// Loads every crafted example saved in a directory, in filename order.
pub fn load_saved_examples(dir: &Path) -> Result<Vec<(AttackTask, AttackResult)>, HarnessError> {
    let mut paths: Vec<std::path::PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_name().is_some_and(|n| n != "report.json")
        })
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        if let Some(pair) = load_saved_example(&path)? {
            out.push(pair);
        }
    }
    Ok(out)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}
