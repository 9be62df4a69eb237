//! Acceptance suite: ten go/no-go checks over the whole toolkit, printed as
//! one PASS/FAIL line each and asserted together at the end.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the table.
//! Numeric tolerances are pinned at the check sites. Wall-clock budgets are
//! printed for the operator instead of asserted; hard time limits mean
//! nothing across laptops, CI runners, and single-core sandboxes.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use sotto_core::attack::{
    craft, estimate_gradient, fine_tune, AttackConfig, AttackError, AttackResult, TracePoint,
};
use sotto_core::audio::tone;
use sotto_core::bank::{build_bank, BankConfig, PhonemeBank};
use sotto_core::defense::{
    defend_lowpass, defend_quantize, evaluate_defense, AdversarialExample, DefenseSpec,
};
use sotto_core::distance::{levenshtein, AttackGoal};
use sotto_core::harness::{run_benchmark, AttackTask, BenchmarkOutcome};
use sotto_core::oracle::linear::LinearDecisionOracle;
use sotto_core::oracle::surrogate::{
    equal_power_mixture, load_labeled_corpus, train_surrogate, CalibrationReport, LabeledClip,
    SurrogateConfig, SurrogateModel,
};
use sotto_core::oracle::{
    estimate_cost, Oracle, OracleError, QueryLedger, QueryPhase, QuerySession, Transcript,
};
use sotto_core::synth::{synth_corpus_to_dir, SynthConfig, VOCAB};
use sotto_core::{AudioClip, Perturbation};

struct Line {
    label: &'static str,
    pass: bool,
    detail: String,
    secs: f64,
}

fn check(label: &'static str, f: impl FnOnce() -> (bool, String)) -> Line {
    let t0 = Instant::now();
    let (pass, detail) = f();
    Line { label, pass, detail, secs: t0.elapsed().as_secs_f64() }
}

/// Shared surrogate world: synthetic spoken-command corpus, trained
/// keyword-spotting oracle, phoneme bank, and one quiet correctly-classified
/// carrier per vocabulary word.
struct Fixture {
    _dir: tempfile::TempDir,
    model: SurrogateModel,
    report: CalibrationReport,
    corpus: Vec<LabeledClip>,
    bank: PhonemeBank,
    carriers: Vec<(String, AudioClip)>,
}

impl Fixture {
    fn build() -> Fixture {
        let dir = tempfile::tempdir().expect("tempdir");
        let synth = SynthConfig { utterances_per_word: 60, seed: 7, ..SynthConfig::default() };
        synth_corpus_to_dir(dir.path(), &synth).expect("synth corpus");
        let corpus = load_labeled_corpus(dir.path()).expect("load corpus");
        let (model, report) =
            train_surrogate(&corpus, &SurrogateConfig::default()).expect("train surrogate");
        let bank = build_bank(dir.path(), &BankConfig::default()).expect("build bank");

        // Quietest correctly-classified utterance per word: small carriers
        // keep each oracle query cheap without biasing the label.
        let mut carriers = Vec::new();
        for word in VOCAB {
            let mut correct: Vec<&AudioClip> = corpus
                .iter()
                .filter(|lc| lc.label == word)
                .filter(|lc| {
                    matches!(model.transcribe(&lc.clip), Ok(Transcript::Text(t)) if t == word)
                })
                .map(|lc| &lc.clip)
                .collect();
            correct.sort_by(|a, b| a.rms().partial_cmp(&b.rms()).unwrap());
            let clip = correct.first().expect("every word has a classified utterance");
            carriers.push((word.to_string(), (*clip).clone()));
        }
        Fixture { _dir: dir, model, report, corpus, bank, carriers }
    }
}

/// Benchmark attack settings for the surrogate oracle. Digital delivery, so
/// no playback band limit; wide l2 budget and coarse step schedule keep the
/// query spend low against a nearest-template decision surface.
fn untargeted_cfg() -> AttackConfig {
    AttackConfig {
        max_init_failures: 600,
        noise_cap: 0.02,
        eta: 0.5,
        eta_floor: 0.01,
        gradient_probes: 15,
        epsilon_l2: 30.0,
        band: None,
        ..AttackConfig::untargeted_defaults()
    }
}

fn targeted_cfg() -> AttackConfig {
    AttackConfig {
        max_init_failures: 4500,
        noise_cap: 0.02,
        eta: 0.5,
        eta_floor: 0.01,
        gradient_probes: 15,
        epsilon_l2: 30.0,
        band: None,
        ..AttackConfig::targeted_defaults()
    }
}

// ---------------------------------------------------------------------------
// 1. Edit-distance oracle equivalence.

/// Textbook prefix recursion for edit distance; the memo caches subproblems
/// without changing the function. Kept independent of the library's
/// single-row iterative version.
fn lev_recursive(a: &[u8], b: &[u8], i: usize, j: usize, memo: &mut [u8; 49]) -> u8 {
    if i == 0 {
        return j as u8;
    }
    if j == 0 {
        return i as u8;
    }
    let k = i * 7 + j;
    if memo[k] != u8::MAX {
        return memo[k];
    }
    let del = lev_recursive(a, b, i - 1, j, memo) + 1;
    let ins = lev_recursive(a, b, i, j - 1, memo) + 1;
    let sub = lev_recursive(a, b, i - 1, j - 1, memo) + u8::from(a[i - 1] != b[j - 1]);
    let v = del.min(ins).min(sub);
    memo[k] = v;
    v
}

fn criterion_1() -> (bool, String) {
    // Every string of length 0..=6 over {a,b,c,d}: 1+4+16+...+4^6 = 5461.
    let mut strings: Vec<Vec<u8>> = vec![Vec::new()];
    let mut frontier: Vec<Vec<u8>> = vec![Vec::new()];
    for _ in 0..6 {
        let mut next = Vec::with_capacity(frontier.len() * 4);
        for s in &frontier {
            for c in [b'a', b'b', b'c', b'd'] {
                let mut t = Vec::with_capacity(s.len() + 1);
                t.extend_from_slice(s);
                t.push(c);
                next.push(t);
            }
        }
        strings.extend(next.iter().cloned());
        frontier = next;
    }
    assert_eq!(strings.len(), 5461);
    let strs: Vec<String> =
        strings.iter().map(|s| String::from_utf8(s.clone()).unwrap()).collect();

    // Rows are handed out by an atomic cursor so every core helps.
    let n = strings.len();
    let cursor = AtomicU64::new(0);
    let workers = std::thread::available_parallelism().map_or(1, |v| v.get());
    let (checked, mismatches) = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut memo = [u8::MAX; 49];
                    let mut checked: u64 = 0;
                    let mut mismatches: u64 = 0;
                    loop {
                        let i = cursor.fetch_add(1, Ordering::Relaxed) as usize;
                        if i >= n {
                            break;
                        }
                        for j in i..n {
                            memo.fill(u8::MAX);
                            let want = lev_recursive(
                                &strings[i],
                                &strings[j],
                                strings[i].len(),
                                strings[j].len(),
                                &mut memo,
                            ) as usize;
                            if levenshtein(&strs[i], &strs[j]) != want {
                                mismatches += 1;
                            }
                            checked += 1;
                            if i != j {
                                // Same oracle value covers the swapped
                                // order: the recursion is symmetric.
                                if levenshtein(&strs[j], &strs[i]) != want {
                                    mismatches += 1;
                                }
                                checked += 1;
                            }
                        }
                    }
                    (checked, mismatches)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker"))
            .fold((0u64, 0u64), |acc, v| (acc.0 + v.0, acc.1 + v.1))
    });
    (
        mismatches == 0,
        format!("{checked} ordered pairs over 5461 strings, {mismatches} mismatches (need 0)"),
    )
}

// ---------------------------------------------------------------------------
// 2. Rejection-region reproduction on the surrogate.

fn criterion_2(fx: &Fixture) -> (bool, String) {
    // Accept side comes from the training-time held-out split; the reject
    // side is re-measured on fresh mixtures the calibration never saw.
    let top1 = fx.report.held_out_top1_accuracy;
    let mut rng = ChaCha20Rng::seed_from_u64(0xA11CE);
    let n_mix = 500usize;
    let mut rejected = 0usize;
    for _ in 0..n_mix {
        loop {
            let a = &fx.corpus[rng.gen_range(0..fx.corpus.len())];
            let b = &fx.corpus[rng.gen_range(0..fx.corpus.len())];
            if a.label == b.label {
                continue;
            }
            let mix = equal_power_mixture(&a.clip, &b.clip);
            if matches!(fx.model.transcribe(&mix).expect("classify"), Transcript::Rejected) {
                rejected += 1;
            }
            break;
        }
    }
    let reject_rate = rejected as f64 / n_mix as f64;
    (
        top1 >= 0.95 && reject_rate >= 0.90,
        format!(
            "held-out top-1 {top1:.3} (need >= 0.950) on {} clips, fresh-mixture reject {reject_rate:.3} (need >= 0.900) on {n_mix} mixtures",
            fx.report.held_out
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. Gradient-sign fidelity on the linear hard-label oracle.

fn criterion_3() -> (bool, String) {
    let dims = 64;
    let mut positive = 0usize;
    let mut cos_sum = 0.0;
    for trial in 0..100u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(trial);
        let mut w: Vec<f64> = (0..dims).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut w {
            *v /= norm;
        }
        let oracle = LinearDecisionOracle::new(w.clone(), 0.0, 16_000);
        let goal = AttackGoal::targeted("neg", "pos");
        // Margin -0.02 at the carrier, +0.01 at the adversarial point; the
        // hard-label loss rises along -w there, so that is the reference
        // gradient direction.
        let x0 =
            AudioClip::new(w.iter().map(|&wi| -0.02 * wi).collect::<Vec<_>>(), 16_000).unwrap();
        let delta = Perturbation::new(
            AudioClip::new(w.iter().map(|&wi| 0.03 * wi).collect::<Vec<_>>(), 16_000).unwrap(),
            0,
        );
        let cfg = AttackConfig {
            sigma: 0.1,
            gradient_probes: 30,
            ..AttackConfig::targeted_defaults()
        };
        let session = QuerySession::new(&oracle);
        let est = estimate_gradient(&session, &x0, &delta, &goal, &cfg, &mut rng).expect("probe");
        let dot: f64 = est.direction.iter().zip(&w).map(|(g, wi)| g * -wi).sum();
        let cos = dot / est.norm().max(1e-300);
        if cos > 0.0 {
            positive += 1;
        }
        cos_sum += cos;
    }
    (
        positive >= 90,
        format!(
            "cosine(estimate, true gradient) > 0 in {positive}/100 trials (need >= 90), mean cosine {:.3}, Q=30",
            cos_sum / 100.0
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Untargeted end-to-end on the surrogate.

fn criterion_4(fx: &Fixture) -> ((bool, String), BenchmarkOutcome, Vec<AttackTask>) {
    // 10 commands x 5 seeds; the harness derives a distinct seed per task.
    let tasks: Vec<AttackTask> = (0..5)
        .flat_map(|_| {
            fx.carriers.iter().map(|(w, c)| AttackTask {
                command: w.clone(),
                carrier: c.clone(),
                target: None,
            })
        })
        .collect();
    let outcome =
        run_benchmark(&fx.model, &fx.bank, &tasks, &untargeted_cfg(), 1000, 0.024).expect("bench");
    let successes = outcome.runs.iter().filter(|r| r.doc.success).count();
    let mut queries: Vec<u64> =
        outcome.runs.iter().map(|r| r.doc.ledger.total_queries).collect();
    queries.sort_unstable();
    let median = (queries[24] + queries[25]) as f64 / 2.0;
    let pass = successes * 100 >= tasks.len() * 80 && median <= 1000.0;
    let detail = format!(
        "{successes}/{} untargeted successes within 2000 queries (need >= 80%), median queries {median:.0} (need <= 1000)",
        tasks.len()
    );
    ((pass, detail), outcome, tasks)
}

// ---------------------------------------------------------------------------
// 5. Targeted end-to-end on the surrogate.

/// Each word's two nearest templates under the oracle's own metric: the
/// confusable pairs a real targeted attack would pick.
fn neighbor_targets(model: &SurrogateModel, word: &str) -> Vec<String> {
    let own = model.templates.iter().position(|t| t.label == word).expect("own template");
    let f = &model.templates[own].centroid;
    let mut d: Vec<(f64, String)> = model
        .templates
        .iter()
        .filter(|t| t.label != word)
        .map(|t| {
            let mut acc = 0.0;
            for (k, (a, b)) in f.iter().zip(&t.centroid).enumerate() {
                let w = if k * 2 >= f.len() { model.variance_weight } else { 1.0 };
                let z = (a - b) / model.scales[k];
                acc += w * z * z;
            }
            (acc, t.label.clone())
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    d.into_iter().take(2).map(|(_, l)| l).collect()
}

fn criterion_5(fx: &Fixture) -> ((bool, String), Vec<AttackResult>) {
    let pairs: Vec<(String, AudioClip, String)> = fx
        .carriers
        .iter()
        .flat_map(|(w, c)| {
            neighbor_targets(&fx.model, w).into_iter().map(move |t| (w.clone(), c.clone(), t))
        })
        .collect();
    assert_eq!(pairs.len(), 20);
    let cfg = targeted_cfg();
    let mut results = Vec::new();
    let mut successes = 0usize;
    for (i, (word, clip, tgt)) in pairs.iter().enumerate() {
        let goal = AttackGoal::targeted(word.clone(), tgt.clone());
        let mut rng = ChaCha20Rng::seed_from_u64(i as u64);
        if let Ok(r) = craft(&fx.model, clip, &goal, &fx.bank, &cfg, &mut rng) {
            if r.success {
                successes += 1;
            }
            results.push(r);
        }
    }
    let pass = successes * 2 >= pairs.len();
    let detail = format!(
        "{successes}/{} targeted successes within 5000 queries over nearest-template pairs (need >= 50%)",
        pairs.len()
    );
    ((pass, detail), results)
}

// ---------------------------------------------------------------------------
// 6. Fine-tune monotonicity and optimality.

fn criterion_6(traces: &[Vec<TracePoint>]) -> (bool, String) {
    let mut steps = 0u64;
    let mut violations = 0u64;
    let mut tally = |trace: &[TracePoint]| {
        for pair in trace.windows(2) {
            steps += 1;
            if pair[1].l2 >= pair[0].l2 {
                violations += 1;
            }
        }
    };
    for t in traces {
        tally(t);
    }

    // Known geometry: boundary at distance m0 along w, walk starts at 4 m0.
    // The emitted perturbation must land within twice the optimum.
    let dims = 16;
    let m0 = 0.01;
    let mut wrng = ChaCha20Rng::seed_from_u64(123);
    let mut w: Vec<f64> = (0..dims).map(|_| wrng.sample::<f64, _>(StandardNormal)).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut w {
        *v /= norm;
    }
    let oracle = LinearDecisionOracle::new(w.clone(), 0.0, 16_000);
    let goal = AttackGoal::targeted("neg", "pos");
    let x0 = AudioClip::new(w.iter().map(|&wi| -m0 * wi).collect::<Vec<_>>(), 16_000).unwrap();
    let delta0 = Perturbation::new(
        AudioClip::new(w.iter().map(|&wi| 4.0 * m0 * wi).collect::<Vec<_>>(), 16_000).unwrap(),
        0,
    );
    let cfg = AttackConfig {
        sigma: 0.5,
        eta: 0.005,
        gradient_probes: 400,
        epsilon_l2: (1.5 * m0) * (1.5 * m0),
        query_budget: 6_000,
        band: None,
        ..AttackConfig::targeted_defaults()
    };
    let mut within = 0usize;
    let mut norms = Vec::new();
    for seed in 0..10u64 {
        let session = QuerySession::new(&oracle);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let res = fine_tune(&session, &x0, &delta0, &goal, &cfg, &mut rng).expect("fine-tune");
        tally(&res.trace);
        let final_norm = res.l2.sqrt();
        norms.push(final_norm);
        if res.success && final_norm <= 2.0 * m0 {
            within += 1;
        }
    }
    let worst = norms.iter().cloned().fold(0.0f64, f64::max);
    (
        violations == 0 && within >= 8,
        format!(
            "{steps} accepted steps, {violations} squared-l2 increases (need 0); norm within 2x optimal in {within}/10 seeds (need >= 8, worst {:.2}x)",
            worst / m0
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. Timing-mismatch trend.

fn criterion_7(
    fx: &Fixture,
    examples: &[(AttackTask, AttackResult)],
) -> (bool, String) {
    let delays = [0u32, 100, 200, 300, 400];
    let curve = sotto_core::harness::delay_sweep(&fx.model, examples, &delays, &untargeted_cfg())
        .expect("delay sweep");
    let rates: Vec<f64> = curve.iter().map(|&(_, r)| r).collect();
    // Endpoints must order; in between the curve may wobble inside a 10
    // percentage-point noise band.
    let endpoints = rates[4] <= rates[0];
    let banded = rates.windows(2).all(|p| p[1] <= p[0] + 0.10);
    let detail = format!(
        "success at {{0,100,200,300,400}} ms = [{}] over {} examples (end <= start, rises capped at 10pp)",
        rates.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", "),
        examples.len()
    );
    (examples.len() >= 20 && endpoints && banded, detail)
}

// ---------------------------------------------------------------------------
// 8a. Low-pass filter frequency response.

fn criterion_8a() -> (bool, String) {
    // 48 kHz clips so twice the 4 kHz cutoff stays well under Nyquist.
    let gain_db = |freq: f64| {
        let clip = tone(freq, 1.0, 0.4, 48_000);
        let out = defend_lowpass(&clip, 4_000, 6).expect("filter");
        let tail = 24_000;
        let rms = |s: &[f64]| (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
        20.0 * (rms(&out.samples()[tail..]) / rms(&clip.samples()[tail..])).log10()
    };
    let at_cutoff = gain_db(4_000.0);
    let at_double = gain_db(8_000.0);
    (
        (at_cutoff + 3.0).abs() <= 0.5 && at_double <= -30.0,
        format!(
            "order-6 Butterworth at 4 kHz cutoff: {at_cutoff:.2} dB (need -3 +/- 0.5), {at_double:.1} dB at 8 kHz (need <= -30)"
        ),
    )
}

// ---------------------------------------------------------------------------
// 8b. Quantization idempotence.

fn criterion_8b() -> (bool, String) {
    let mut rng = ChaCha20Rng::seed_from_u64(88);
    let n = 1000usize;
    let mut stable = 0usize;
    for _ in 0..n {
        let len = rng.gen_range(1..=4000usize);
        let samples: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let clip = AudioClip::from_unclamped(samples, 16_000).expect("clip");
        let q = rng.gen_range(2..=32_768u32);
        let once = defend_quantize(&clip, q).expect("quantize");
        let twice = defend_quantize(&once, q).expect("requantize");
        if once.samples() == twice.samples() {
            stable += 1;
        }
    }
    (stable == n, format!("{stable}/{n} random clips bit-stable under requantization (need all)"))
}

// ---------------------------------------------------------------------------
// 8c. Defense strength ordering.

fn criterion_8c(fx: &Fixture, aes: &[AdversarialExample]) -> (bool, String) {
    let rate = |spec: &str| {
        let spec: DefenseSpec = spec.parse().expect("spec");
        evaluate_defense(&fx.model, aes, &spec, false).expect("defense").success_after
    };
    let none = rate("none");
    let ds8 = rate("ds8000");
    let ds4 = rate("ds4000");
    (
        aes.len() >= 50 && ds4 <= ds8 && ds8 <= none,
        format!(
            "success over {} examples: none {none:.3} >= 8 kHz downsample {ds8:.3} >= 4 kHz downsample {ds4:.3}",
            aes.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. Query-ledger conservation and cost arithmetic.

struct CountingOracle<'a> {
    inner: &'a SurrogateModel,
    hits: AtomicU64,
}

impl Oracle for CountingOracle<'_> {
    fn transcribe(&self, clip: &AudioClip) -> Result<Transcript, OracleError> {
        let t = self.inner.transcribe(clip)?;
        self.hits.fetch_add(1, Ordering::SeqCst);
        Ok(t)
    }

    fn sample_rate(&self) -> u32 {
        self.inner.sample_rate
    }
}

fn criterion_9(fx: &Fixture) -> (bool, String) {
    let cfg = untargeted_cfg();
    let mut exact = 0usize;
    let mut total_runs = 0usize;
    for (i, (word, clip)) in fx.carriers.iter().enumerate() {
        total_runs += 1;
        let counting = CountingOracle { inner: &fx.model, hits: AtomicU64::new(0) };
        let goal = AttackGoal::untargeted(word.clone());
        let mut rng = ChaCha20Rng::seed_from_u64(9000 + i as u64);
        let reported = match craft(&counting, clip, &goal, &fx.bank, &cfg, &mut rng) {
            Ok(r) => r.ledger.total_queries,
            Err(AttackError::InitFailed { queries, .. }) => queries,
            Err(AttackError::BadCarrier { .. }) => 1,
            Err(e) => panic!("unexpected attack error: {e}"),
        };
        if counting.hits.load(Ordering::SeqCst) == reported {
            exact += 1;
        }
    }

    // Billing arithmetic: one-second queries at $0.024 per audio minute.
    let cost_of = |n: usize| {
        let mut ledger = QueryLedger::default();
        for _ in 0..n {
            ledger.record(QueryPhase::Eval, 1.0);
        }
        estimate_cost(&ledger, 0.024)
    };
    // Double-precision exactness: equality up to one rounding step.
    let c300 = cost_of(300);
    let c1500 = cost_of(1500);
    let cost_ok = (c300 - 0.12).abs() < 1e-12 && (c1500 - 0.60).abs() < 1e-12;
    (
        exact == total_runs && cost_ok,
        format!(
            "ledger matched an instrumented oracle exactly in {exact}/{total_runs} attack runs; 300 x 1 s -> ${c300:.2}, 1500 x 1 s -> ${c1500:.2}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 10. Benchmark determinism.

fn criterion_10(fx: &Fixture) -> (bool, String) {
    let tasks: Vec<AttackTask> = fx
        .carriers
        .iter()
        .map(|(w, c)| AttackTask { command: w.clone(), carrier: c.clone(), target: None })
        .collect();
    let cfg = untargeted_cfg();
    let run = || run_benchmark(&fx.model, &fx.bank, &tasks, &cfg, 7, 0.024).expect("bench");
    let a = run();
    let b = run();
    let docs = |o: &BenchmarkOutcome| -> Vec<String> {
        o.runs.iter().map(|r| r.doc.to_json().expect("json")).collect()
    };
    let docs_equal = docs(&a) == docs(&b);
    let report_equal = serde_json::to_string(&a.report).expect("json")
        == serde_json::to_string(&b.report).expect("json");
    (
        docs_equal && report_equal,
        format!(
            "two seed-7 runs over {} tasks: result documents byte-identical: {docs_equal}, report byte-identical: {report_equal}",
            tasks.len()
        ),
    )
}

// ---------------------------------------------------------------------------

#[test]
fn acceptance() {
    let mut lines: Vec<Line> = Vec::new();
    let suite_start = Instant::now();

    lines.push(check("1  edit-distance oracle equivalence", criterion_1));
    lines.push(check("3  gradient-sign fidelity", criterion_3));
    lines.push(check("8a low-pass frequency response", criterion_8a));
    lines.push(check("8b quantization idempotence", criterion_8b));

    let t0 = Instant::now();
    let fx = Fixture::build();
    eprintln!(
        "fixture: {} clips, 10 words, bank of {} fragments, threshold {:.3} ({:.1}s)",
        fx.corpus.len(),
        fx.bank.len(),
        fx.report.rejection_threshold,
        t0.elapsed().as_secs_f64()
    );

    lines.push(check("2  rejection-region reproduction", || criterion_2(&fx)));

    let t0 = Instant::now();
    let ((pass4, detail4), outcome, tasks) = criterion_4(&fx);
    lines.push(Line {
        label: "4  untargeted end-to-end",
        pass: pass4,
        detail: detail4,
        secs: t0.elapsed().as_secs_f64(),
    });

    let t0 = Instant::now();
    let ((pass5, detail5), targeted_results) = criterion_5(&fx);
    lines.push(Line {
        label: "5  targeted end-to-end",
        pass: pass5,
        detail: detail5,
        secs: t0.elapsed().as_secs_f64(),
    });

    // Traces from every surrogate attack feed the monotonicity check.
    let mut traces: Vec<Vec<TracePoint>> =
        outcome.runs.iter().map(|r| r.doc.trace.clone()).collect();
    traces.extend(targeted_results.iter().map(|r| r.trace.clone()));
    lines.push(check("6  fine-tune monotonicity/optimality", || criterion_6(&traces)));

    // Successful untargeted runs double as the example pool for the timing
    // and defense trends.
    let mut examples: Vec<(AttackTask, AttackResult)> = Vec::new();
    let mut aes: Vec<AdversarialExample> = Vec::new();
    for (task, run) in tasks.iter().zip(&outcome.runs) {
        if !run.doc.success {
            continue;
        }
        let result = AttackResult {
            perturbation: run.perturbation.clone().expect("successful run keeps its delta"),
            final_transcript: run.doc.final_transcript.clone(),
            success: true,
            ledger: run.doc.ledger.clone(),
            l2: run.doc.l2,
            trace: run.doc.trace.clone(),
            components: run.doc.components.clone(),
        };
        examples.push((task.clone(), result.clone()));
        aes.push(AdversarialExample {
            carrier: task.carrier.clone(),
            goal: task.goal(),
            result,
        });
    }
    // Top up with fresh runs if failures left the pool short; the ordering
    // check needs at least 50 examples.
    let mut extra_seed = 31_337u64;
    while aes.len() < 50 {
        let (word, clip) = &fx.carriers[aes.len() % fx.carriers.len()];
        let goal = AttackGoal::untargeted(word.clone());
        let mut rng = ChaCha20Rng::seed_from_u64(extra_seed);
        extra_seed += 1;
        if extra_seed > 31_437 {
            break;
        }
        let Ok(result) = craft(&fx.model, clip, &goal, &fx.bank, &untargeted_cfg(), &mut rng)
        else {
            continue;
        };
        if !result.success {
            continue;
        }
        let task =
            AttackTask { command: word.clone(), carrier: clip.clone(), target: None };
        examples.push((task, result.clone()));
        aes.push(AdversarialExample { carrier: clip.clone(), goal, result });
    }

    lines.push(check("7  timing-mismatch trend", || criterion_7(&fx, &examples)));
    lines.push(check("8c defense strength ordering", || criterion_8c(&fx, &aes)));
    lines.push(check("9  query-ledger conservation", || criterion_9(&fx)));
    lines.push(check("10 benchmark determinism", || criterion_10(&fx)));

    lines.sort_by_key(|l| {
        let head: String =
            l.label.chars().take_while(|c| c.is_ascii_alphanumeric()).collect();
        (head.trim_end_matches(|c: char| c.is_ascii_alphabetic()).parse::<u32>().unwrap(), head)
    });
    eprintln!("\nacceptance results ({:.0}s total):", suite_start.elapsed().as_secs_f64());
    let mut all_pass = true;
    for l in &lines {
        all_pass &= l.pass;
        eprintln!(
            "criterion {}: {} - {} ({:.1}s)",
            l.label,
            if l.pass { "PASS" } else { "FAIL" },
            l.detail,
            l.secs
        );
    }
    assert!(all_pass, "acceptance criteria failed; see the table above");
}
