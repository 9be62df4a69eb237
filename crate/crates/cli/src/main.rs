//! `sotto`: command line front end for the attack and defense toolkit.
//!
//! Exit codes: 0 success, 1 usage error (bad flags, unknown config keys,
//! empty inputs), 2 runtime failure (oracle, audio, or io errors mid-run).

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use sotto_core::attack::AttackConfig;
use sotto_core::bank::{build_bank, load_bank, save_bank, BankConfig};
use sotto_core::defense::{apply_defense, evaluate_defense, AdversarialExample, DefenseSpec};
use sotto_core::distance::attack_goal_holds;
use sotto_core::harness::{
    load_saved_example, run_benchmark, save_outcome, AttackTask,
};
use sotto_core::oracle::remote::{RemoteConfig, RemoteOracle};
use sotto_core::oracle::surrogate::{load_labeled_corpus, train_surrogate, SurrogateConfig, SurrogateModel};
use sotto_core::oracle::{estimate_cost, Oracle};
use sotto_core::report::{
    defense_plot_tsv, sweep_plot_tsv, Report, ResultDoc, RunRecord,
};
use sotto_core::synth::{synth_corpus_to_dir, SynthConfig};
use sotto_core::{AudioClip, Transcript};

use config::{parse_band, FileConfig};

#[derive(Parser)]
#[command(
    name = "sotto",
    version,
    about = "Decision-based audio attack toolkit: corpus, bank, surrogate, attack, sweep, defend, report"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Corpus utilities.
    Corpus {
        #[command(subcommand)]
        cmd: CorpusCmd,
    },
    /// Phoneme bank utilities.
    Bank {
        #[command(subcommand)]
        cmd: BankCmd,
    },
    /// Surrogate oracle utilities.
    Surrogate {
        #[command(subcommand)]
        cmd: SurrogateCmd,
    },
    /// Craft a perturbation against one carrier and save a result bundle.
    Attack(AttackArgs),
    /// Replay saved examples under playback-timing mismatch and emit the
    /// (delay_ms, success_rate) curve.
    Sweep(SweepArgs),
    /// Re-evaluate saved examples behind input-transformation defenses.
    Defend(DefendArgs),
    /// Aggregate saved result documents into a report.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Generate the synthetic spoken-command corpus (one WAV per utterance,
    /// `<word>/<word>_NNN.wav`, plus manifest.txt).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        utterances_per_word: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated word list; defaults to the built-in ten commands.
        #[arg(long)]
        words: Option<String>,
    },
}

#[derive(Subcommand)]
enum BankCmd {
    /// Cut random 50-300 ms fragments from a corpus into a phoneme bank.
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 453)]
        clips: usize,
        #[arg(long, default_value_t = 50.0)]
        min_ms: f64,
        #[arg(long, default_value_t = 300.0)]
        max_ms: f64,
        #[arg(long, default_value_t = -40.0)]
        trim_db: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum SurrogateCmd {
    /// Train the keyword-spotting surrogate and calibrate its rejection
    /// threshold; prints the calibration report.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        holdout: f64,
        #[arg(long, default_value_t = 400)]
        mixtures: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct AttackArgs {
    /// Flat key = value experiment file; any flag below overrides it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Surrogate model path, or http(s) endpoint for a remote oracle.
    #[arg(long)]
    oracle: Option<String>,
    /// Phoneme bank directory.
    #[arg(long)]
    bank: Option<PathBuf>,
    /// Carrier WAV to perturb.
    #[arg(long)]
    carrier: Option<PathBuf>,
    /// Reference transcription of the carrier; defaults to what the oracle
    /// says about the clean carrier.
    #[arg(long)]
    command: Option<String>,
    /// Target transcript (switches to a targeted attack).
    #[arg(long)]
    target: Option<String>,
    /// untargeted | targeted.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Oracle price per audio minute used for cost estimates.
    #[arg(long)]
    rate_per_minute: Option<f64>,
    /// Query budget for the whole run.
    #[arg(long)]
    budget: Option<u64>,
    /// Failed initialization rounds before giving up (K).
    #[arg(long)]
    init_failures: Option<usize>,
    /// Probe directions per gradient estimate (Q).
    #[arg(long)]
    probes: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eta_floor: Option<f64>,
    #[arg(long)]
    sync_shifts: Option<usize>,
    #[arg(long)]
    sync_tau_ms: Option<f64>,
    /// Stop fine-tuning once the squared-l2 distortion is at or below this.
    #[arg(long)]
    epsilon_l2: Option<f64>,
    /// Uniform noise cap for initialization draws.
    #[arg(long)]
    noise_cap: Option<f64>,
    /// Perturbation band limit: `none` or `LOW:HIGH` in Hz.
    #[arg(long)]
    band: Option<String>,
    /// Require the goal to hold at every timing shift while fine-tuning.
    #[arg(long)]
    weak_sync: Option<bool>,
    /// Count a rejected transcript as attack success.
    #[arg(long)]
    count_rejection_as_success: Option<bool>,
    /// Environment variable holding the remote oracle bearer token.
    #[arg(long)]
    auth_env: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Surrogate model path or http(s) endpoint.
    #[arg(long)]
    oracle: String,
    /// Directory written by `sotto attack` (result documents + sidecars).
    #[arg(long, value_name = "DIR")]
    r#in: PathBuf,
    /// Comma-separated playback delays in milliseconds.
    #[arg(long, default_value = "0,100,200,300,400")]
    delays: String,
    /// Write the (delay_ms, success_rate) TSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    count_rejection_as_success: bool,
    #[arg(long)]
    auth_env: Option<String>,
}

#[derive(Args)]
struct DefendArgs {
    /// Surrogate model path or http(s) endpoint.
    #[arg(long)]
    oracle: String,
    /// Defense spec, repeatable: none, ds:8000, ds8000, ds4000raw, q:512,
    /// lp:4000:o6 (colons optional).
    #[arg(long, required = true)]
    spec: Vec<String>,
    /// Result document paths (shell globs expand to these).
    #[arg(long, required = true, num_args = 1..)]
    aes: Vec<PathBuf>,
    /// Write the per-example CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a (defense, success_rate) TSV including the `none`
    /// baseline row.
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long)]
    count_rejection_as_success: bool,
    #[arg(long)]
    auth_env: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory of result documents.
    #[arg(long, value_name = "DIR")]
    r#in: PathBuf,
    /// Write the aggregated report JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the per-run CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 0.024)]
    rate_per_minute: f64,
}

enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

trait RuntimeResult<T> {
    fn rt(self) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> RuntimeResult<T> for Result<T, E> {
    fn rt(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Corpus { cmd } => match cmd {
            CorpusCmd::Synth { out, utterances_per_word, seed, words } => {
                corpus_synth(&out, utterances_per_word, seed, words.as_deref())
            }
        },
        Cmd::Bank { cmd } => match cmd {
            BankCmd::Build { corpus, out, clips, min_ms, max_ms, trim_db, seed } => {
                bank_build(&corpus, &out, clips, min_ms, max_ms, trim_db, seed)
            }
        },
        Cmd::Surrogate { cmd } => match cmd {
            SurrogateCmd::Train { corpus, out, holdout, mixtures, seed } => {
                surrogate_train(&corpus, &out, holdout, mixtures, seed)
            }
        },
        Cmd::Attack(args) => attack(args),
        Cmd::Sweep(args) => sweep(args),
        Cmd::Defend(args) => defend(args),
        Cmd::Report(args) => report(args),
    }
}

// ---------------------------------------------------------------------------

fn corpus_synth(
    out: &Path,
    utterances_per_word: usize,
    seed: u64,
    words: Option<&str>,
) -> Result<(), CliError> {
    let mut cfg = SynthConfig { utterances_per_word, seed, ..SynthConfig::default() };
    if let Some(list) = words {
        let words: Vec<String> =
            list.split(',').map(|w| w.trim().to_string()).filter(|w| !w.is_empty()).collect();
        if words.is_empty() {
            return Err(usage("--words parsed to an empty list"));
        }
        cfg.words = words;
    }
    let paths = synth_corpus_to_dir(out, &cfg).rt()?;
    println!(
        "wrote {} utterances across {} words to {}",
        paths.len(),
        cfg.words.len(),
        out.display()
    );
    Ok(())
}

fn bank_build(
    corpus: &Path,
    out: &Path,
    clips: usize,
    min_ms: f64,
    max_ms: f64,
    trim_db: f64,
    seed: u64,
) -> Result<(), CliError> {
    let cfg = BankConfig { n_clips: clips, min_ms, max_ms, trim_threshold_db: trim_db, seed };
    let bank = build_bank(corpus, &cfg).rt()?;
    save_bank(&bank, out).rt()?;
    println!("bank of {} fragments at {} Hz saved to {}", bank.len(), bank.sample_rate(), out.display());
    Ok(())
}

fn surrogate_train(
    corpus: &Path,
    out: &Path,
    holdout: f64,
    mixtures: usize,
    seed: u64,
) -> Result<(), CliError> {
    let clips = load_labeled_corpus(corpus).rt()?;
    let cfg = SurrogateConfig {
        holdout_fraction: holdout,
        calibration_mixtures: mixtures,
        seed,
        ..SurrogateConfig::default()
    };
    let (model, report) = train_surrogate(&clips, &cfg).rt()?;
    model.save(out).rt()?;
    println!("trained on {} clips, {} templates", clips.len(), model.templates.len());
    println!(
        "held-out: {} clips, accept rate {:.3}, top-1 accuracy {:.3}",
        report.held_out, report.held_out_accept_rate, report.held_out_top1_accuracy
    );
    println!(
        "mixtures: {} evaluated, reject rate {:.3}; rejection threshold {:.4}",
        mixtures, report.mixture_reject_rate, report.rejection_threshold
    );
    println!("model saved to {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------

enum OracleHandle {
    Surrogate(Box<SurrogateModel>),
    Remote(Box<RemoteOracle>),
}

impl OracleHandle {
    fn as_dyn(&self) -> &dyn Oracle {
        match self {
            OracleHandle::Surrogate(m) => m.as_ref(),
            OracleHandle::Remote(r) => r.as_ref(),
        }
    }
}

fn open_oracle(spec: &str, auth_env: Option<&str>) -> Result<OracleHandle, CliError> {
    if spec.starts_with("http://") || spec.starts_with("https://") {
        let mut cfg = RemoteConfig { url: spec.to_string(), ..RemoteConfig::default() };
        if let Some(var) = auth_env {
            cfg.auth_env = var.to_string();
        }
        return Ok(OracleHandle::Remote(Box::new(RemoteOracle::new(cfg))));
    }
    let model = SurrogateModel::load(spec).rt()?;
    Ok(OracleHandle::Surrogate(Box::new(model)))
}

/// Flag beats file beats default.
fn overlay<T>(slot: &mut T, flag: Option<T>, file: Option<T>) {
    if let Some(v) = flag.or(file) {
        *slot = v;
    }
}

fn attack(args: AttackArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path).map_err(CliError::Usage)?,
        None => FileConfig::default(),
    };
    let fstr = |key: &str| file.get(key).map(str::to_string);

    let oracle_spec = args
        .oracle
        .or_else(|| fstr("oracle"))
        .ok_or_else(|| usage("--oracle is required (flag or config key `oracle`)"))?;
    let bank_dir = args
        .bank
        .map(PathBuf::from)
        .or_else(|| fstr("bank").map(PathBuf::from))
        .ok_or_else(|| usage("--bank is required (flag or config key `bank`)"))?;
    let carrier_path = args
        .carrier
        .or_else(|| fstr("carrier").map(PathBuf::from))
        .ok_or_else(|| usage("--carrier is required (flag or config key `carrier`)"))?;

    let mode = args.mode.or_else(|| fstr("mode"));
    let target = args.target.or_else(|| fstr("target"));
    let target = match (mode.as_deref(), target) {
        (Some("targeted"), Some(t)) => Some(t),
        (Some("targeted"), None) => {
            return Err(usage("targeted mode needs --target"));
        }
        (Some("untargeted"), Some(_)) => {
            return Err(usage("--target given but mode is untargeted"));
        }
        (Some("untargeted") | None, t) => t,
        (Some(other), _) => {
            return Err(usage(format!("unknown mode `{other}` (untargeted|targeted)")));
        }
    };

    let mut cfg = if target.is_some() {
        AttackConfig::targeted_defaults()
    } else {
        AttackConfig::untargeted_defaults()
    };
    let pf = |k: &str| file.parsed(k).map_err(CliError::Usage);
    overlay(&mut cfg.query_budget, args.budget, pf("budget")?);
    overlay(&mut cfg.max_init_failures, args.init_failures, pf("init-failures")?);
    overlay(&mut cfg.gradient_probes, args.probes, pf("probes")?);
    overlay(&mut cfg.sigma, args.sigma, pf("sigma")?);
    overlay(&mut cfg.eta, args.eta, pf("eta")?);
    overlay(&mut cfg.eta_floor, args.eta_floor, pf("eta-floor")?);
    overlay(&mut cfg.sync_shifts, args.sync_shifts, pf("sync-shifts")?);
    overlay(&mut cfg.sync_tau_ms, args.sync_tau_ms, pf("sync-tau-ms")?);
    overlay(&mut cfg.epsilon_l2, args.epsilon_l2, pf("epsilon-l2")?);
    overlay(&mut cfg.noise_cap, args.noise_cap, pf("noise-cap")?);
    overlay(&mut cfg.weak_sync, args.weak_sync, pf("weak-sync")?);
    overlay(
        &mut cfg.count_rejection_as_success,
        args.count_rejection_as_success,
        pf("count-rejection-as-success")?,
    );
    let band_raw = args.band.or_else(|| fstr("band"));
    if let Some(raw) = band_raw {
        cfg.band = parse_band(&raw).map_err(CliError::Usage)?;
    }

    let seed = match args.seed {
        Some(s) => s,
        None => pf("seed")?.unwrap_or(0),
    };
    let rate = match args.rate_per_minute {
        Some(r) => r,
        None => pf("rate-per-minute")?.unwrap_or(0.024),
    };
    let out_dir = args
        .out
        .or_else(|| fstr("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let auth_env = args.auth_env.or_else(|| fstr("auth-env"));

    let oracle = open_oracle(&oracle_spec, auth_env.as_deref())?;
    let bank = load_bank(&bank_dir).rt()?;
    let carrier = sotto_core::audio::load_wav(&carrier_path).rt()?;

    let command = match args.command.or_else(|| fstr("command")) {
        Some(c) => c,
        None => match oracle.as_dyn().transcribe(&carrier).rt()? {
            Transcript::Text(t) => {
                println!("carrier transcribes as \"{t}\"; attacking that label");
                t
            }
            Transcript::Rejected => {
                return Err(CliError::Runtime(anyhow!(
                    "the oracle rejected the clean carrier; pass --command explicitly"
                )));
            }
        },
    };

    let task = AttackTask { command: command.clone(), carrier, target: target.clone() };
    let outcome = run_benchmark(oracle.as_dyn(), &bank, &[task.clone()], &cfg, seed, rate).rt()?;
    save_outcome(&outcome, std::slice::from_ref(&task), &out_dir).rt()?;

    let run = &outcome.runs[0];
    let transcript = match &run.doc.final_transcript {
        Transcript::Text(t) => t.clone(),
        Transcript::Rejected => "<rejected>".to_string(),
    };
    println!(
        "{} \"{command}\"{}: success={} queries={} l2={:.4} final=\"{transcript}\"",
        if target.is_some() { "targeted" } else { "untargeted" },
        target.as_deref().map(|t| format!(" -> \"{t}\"")).unwrap_or_default(),
        run.doc.success,
        run.doc.ledger.total_queries,
        run.doc.l2,
    );
    println!(
        "queries by phase: init {} gradient {} finetune {} eval {}; audio {:.1} s, est. cost ${:.4}",
        run.doc.ledger.init_queries,
        run.doc.ledger.gradient_queries,
        run.doc.ledger.finetune_queries,
        run.doc.ledger.eval_queries,
        run.doc.ledger.total_audio_seconds,
        estimate_cost(&run.doc.ledger, rate),
    );
    println!("results saved to {}", out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let delays = parse_delays(&args.delays)?;
    let examples = sotto_core::harness::load_saved_examples(&args.r#in).rt()?;
    if examples.is_empty() {
        return Err(usage(format!(
            "no crafted examples in {} (need result documents with perturbation sidecars)",
            args.r#in.display()
        )));
    }
    let oracle = open_oracle(&args.oracle, args.auth_env.as_deref())?;
    let cfg = AttackConfig {
        count_rejection_as_success: args.count_rejection_as_success,
        ..AttackConfig::untargeted_defaults()
    };
    let curve = sotto_core::harness::delay_sweep(oracle.as_dyn(), &examples, &delays, &cfg).rt()?;
    let tsv = sweep_plot_tsv(&curve);
    match &args.out {
        Some(path) => {
            std::fs::write(path, tsv).rt()?;
            println!("swept {} examples over {} delays; wrote {}", examples.len(), delays.len(), path.display());
        }
        None => print!("{tsv}"),
    }
    Ok(())
}

fn parse_delays(raw: &str) -> Result<Vec<u32>, CliError> {
    let delays: Result<Vec<u32>, _> =
        raw.split(',').map(|d| d.trim().parse::<u32>()).collect();
    let delays = delays.map_err(|_| usage(format!("bad --delays list `{raw}`")))?;
    if delays.is_empty() {
        return Err(usage("--delays parsed to an empty list"));
    }
    Ok(delays)
}

// ---------------------------------------------------------------------------

fn defend(args: DefendArgs) -> Result<(), CliError> {
    let mut specs = Vec::new();
    for raw in &args.spec {
        // Accept the colon-separated spelling: ds:8000 == ds8000.
        let normalized: String = raw.chars().filter(|&c| c != ':').collect();
        let spec: DefenseSpec = normalized
            .parse()
            .map_err(|_| usage(format!("unknown defense spec `{raw}`")))?;
        specs.push(spec);
    }

    let mut aes: Vec<(PathBuf, AdversarialExample)> = Vec::new();
    let mut skipped = 0usize;
    for path in &args.aes {
        if path.file_name().is_some_and(|n| n == "report.json") {
            continue;
        }
        match load_saved_example(path).rt()? {
            Some((task, result)) => {
                let goal = task.goal();
                aes.push((
                    path.clone(),
                    AdversarialExample { carrier: task.carrier, goal, result },
                ));
            }
            None => skipped += 1,
        }
    }
    if aes.is_empty() {
        return Err(usage(format!(
            "no crafted examples among the {} given documents ({skipped} had no perturbation)",
            args.aes.len()
        )));
    }

    let oracle = open_oracle(&args.oracle, args.auth_env.as_deref())?;
    let mut csv =
        String::from("file,defense,command,target,success_before,transcript_after,success_after\n");
    for spec in &specs {
        for (path, ae) in &aes {
            let waveform = ae.adversarial_waveform().rt()?;
            let defended = apply_defense(&waveform, spec).rt()?;
            let after = oracle.as_dyn().transcribe(&defended).rt()?;
            let holds = attack_goal_holds(&after, &ae.goal, args.count_rejection_as_success);
            let after_text = match &after {
                Transcript::Text(t) => t.clone(),
                Transcript::Rejected => "<rejected>".to_string(),
            };
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                path.display(),
                spec,
                ae.goal.original,
                ae.goal.target.as_deref().unwrap_or(""),
                ae.result.success,
                after_text,
                holds,
            ));
        }
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, csv).rt()?;
            println!(
                "evaluated {} defenses over {} examples; wrote {}",
                specs.len(),
                aes.len(),
                path.display()
            );
        }
        None => print!("{csv}"),
    }

    if let Some(plot) = &args.plot {
        // The plot always carries the undefended baseline row.
        let mut plot_specs = vec![DefenseSpec::None];
        for s in &specs {
            if !matches!(s, DefenseSpec::None) {
                plot_specs.push(s.clone());
            }
        }
        let examples: Vec<AdversarialExample> = aes.iter().map(|(_, ae)| ae.clone()).collect();
        let mut reports = Vec::new();
        for spec in &plot_specs {
            reports.push(
                evaluate_defense(
                    oracle.as_dyn(),
                    &examples,
                    spec,
                    args.count_rejection_as_success,
                )
                .rt()?,
            );
        }
        std::fs::write(plot, defense_plot_tsv(&reports).rt()?).rt()?;
        println!("wrote defense curve to {}", plot.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn report(args: ReportArgs) -> Result<(), CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&args.r#in)
        .map_err(|e| usage(format!("cannot read {}: {e}", args.r#in.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_name().is_some_and(|n| n != "report.json")
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(usage(format!("no result documents in {}", args.r#in.display())));
    }
    let mut rows = Vec::new();
    for path in &paths {
        let doc = ResultDoc::load(path).rt()?;
        rows.push(RunRecord::from_result_doc(&doc));
    }
    let report = Report::new(rows, args.rate_per_minute).rt()?;
    let a = &report.aggregates;
    println!("runs: {} ({} succeeded, success rate {:.3})", a.attempts, a.successes, a.success_rate);
    match a.avg_queries_per_crafted {
        Some(v) => println!("avg queries per crafted example: {v:.1}"),
        None => println!("avg queries per crafted example: null (nothing crafted)"),
    }
    println!("queries: mean {:.1}, median {:.1}, total {}", a.mean_queries, a.median_queries, a.total_queries);
    match a.median_l2_crafted {
        Some(v) => println!("median squared-l2 of crafted examples: {v:.4}"),
        None => println!("median squared-l2 of crafted examples: null"),
    }
    println!(
        "audio: {:.1} s submitted, estimated cost ${:.4} at ${}/min",
        a.total_audio_seconds, a.cost_estimate, report.rate_per_minute
    );
    if let Some(path) = &args.out {
        report.save(path).rt()?;
        println!("report JSON written to {}", path.display());
    }
    if let Some(path) = &args.csv {
        std::fs::write(path, report.csv()).rt()?;
        println!("per-run CSV written to {}", path.display());
    }
    Ok(())
}
