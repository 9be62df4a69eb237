//! Result serialization and metrics aggregation: per-attack result
//! documents, benchmark reports with recomputable aggregates, and plot-data
//! emission. Wall-clock timings are kept out of all deterministic outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{AttackResult, ComponentRecord, TracePoint};
use crate::defense::DefenseReport;
use crate::distance::AttackGoal;
use crate::oracle::{estimate_cost, QueryLedger, Transcript};

pub const RESULT_SCHEMA: &str = "sotto-result-v1";
pub const REPORT_SCHEMA: &str = "sotto-report-v1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no rows to aggregate")]
    Empty,
    #[error("stored aggregates do not match rows: {0}")]
    Inconsistent(String),
    #[error("unexpected schema '{got}', wanted '{want}'")]
    Schema { got: String, want: String },
    #[error("defense plot data needs a baseline 'none' row")]
    MissingBaseline,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One attack run, serialized. Deterministic for a fixed seed and oracle:
/// carries no wall-clock fields (timings go to a separate CSV sidecar).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultDoc {
    pub schema: String,
    pub command: String,
    pub target: Option<String>,
    pub seed: u64,
    pub success: bool,
    pub final_transcript: Transcript,
    pub l2: f64,
    pub ledger: QueryLedger,
    pub trace: Vec<TracePoint>,
    pub components: Vec<ComponentRecord>,
    /// Relative path of the perturbation WAV sidecar, when one was written.
    pub perturbation_wav: Option<String>,
    pub perturbation_offset_samples: usize,
    /// Relative path of the carrier WAV sidecar; present in saved outcome
    /// directories so downstream defense and sweep runs are self-contained.
    #[serde(default)]
    pub carrier_wav: Option<String>,
}

impl ResultDoc {
    pub fn new(command: &str, goal: &AttackGoal, seed: u64, result: &AttackResult) -> ResultDoc {
        ResultDoc {
            schema: RESULT_SCHEMA.to_string(),
            command: command.to_string(),
            target: goal.target.clone(),
            seed,
            success: result.success,
            final_transcript: result.final_transcript.clone(),
            l2: result.l2,
            ledger: result.ledger.clone(),
            trace: result.trace.clone(),
            components: result.components.clone(),
            perturbation_wav: None,
            perturbation_offset_samples: result.perturbation.offset_samples,
            carrier_wav: None,
        }
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<ResultDoc, ReportError> {
        let doc: ResultDoc = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if doc.schema != RESULT_SCHEMA {
            return Err(ReportError::Schema { got: doc.schema, want: RESULT_SCHEMA.into() });
        }
        Ok(doc)
    }
}

/// One report row per attack run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub target: Option<String>,
    pub success: bool,
    pub queries: u64,
    pub audio_seconds: f64,
    pub l2: f64,
    /// Recorded for operators, never aggregated or asserted on.
    pub wall_time_ms: Option<f64>,
}

impl RunRecord {
    pub fn from_result_doc(doc: &ResultDoc) -> RunRecord {
        RunRecord {
            command: doc.command.clone(),
            target: doc.target.clone(),
            success: doc.success,
            queries: doc.ledger.total_queries,
            audio_seconds: doc.ledger.total_audio_seconds,
            l2: doc.l2,
            wall_time_ms: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub attempts: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Total queries across ALL attempts divided by the number of crafted
    /// (successful) examples; null when nothing was crafted.
    pub avg_queries_per_crafted: Option<f64>,
    pub mean_queries: f64,
    pub median_queries: f64,
    pub median_l2_crafted: Option<f64>,
    pub total_queries: u64,
    pub total_audio_seconds: f64,
    pub cost_estimate: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Computes report aggregates from rows. The query average follows the
/// crafted-AE convention: every query spent, successful or not, is charged
/// to the examples actually produced.
pub fn aggregate(rows: &[RunRecord], rate_per_minute: f64) -> Result<Aggregates, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let attempts = rows.len();
    let successes = rows.iter().filter(|r| r.success).count();
    let total_queries: u64 = rows.iter().map(|r| r.queries).sum();
    let total_audio_seconds: f64 = rows.iter().map(|r| r.audio_seconds).sum();
    let mut queries: Vec<f64> = rows.iter().map(|r| r.queries as f64).collect();
    queries.sort_by(f64::total_cmp);
    let mut l2s: Vec<f64> = rows.iter().filter(|r| r.success).map(|r| r.l2).collect();
    l2s.sort_by(f64::total_cmp);
    let ledger = QueryLedger { total_audio_seconds, ..QueryLedger::default() };
    Ok(Aggregates {
        attempts,
        successes,
        success_rate: successes as f64 / attempts as f64,
        avg_queries_per_crafted: (successes > 0)
            .then(|| total_queries as f64 / successes as f64),
        mean_queries: total_queries as f64 / attempts as f64,
        median_queries: median(&queries),
        median_l2_crafted: (!l2s.is_empty()).then(|| median(&l2s)),
        total_queries,
        total_audio_seconds,
        cost_estimate: estimate_cost(&ledger, rate_per_minute),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub rate_per_minute: f64,
    pub rows: Vec<RunRecord>,
    pub aggregates: Aggregates,
}

impl Report {
    pub fn new(rows: Vec<RunRecord>, rate_per_minute: f64) -> Result<Report, ReportError> {
        let aggregates = aggregate(&rows, rate_per_minute)?;
        Ok(Report { schema: REPORT_SCHEMA.to_string(), rate_per_minute, rows, aggregates })
    }

    pub fn save(&self, path: &Path) -> Result<(), ReportError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Loads and re-derives the aggregates from the rows; a mismatch means
    /// the file was edited or produced by broken code.
    pub fn load(path: &Path) -> Result<Report, ReportError> {
        let report: Report = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if report.schema != REPORT_SCHEMA {
            return Err(ReportError::Schema { got: report.schema, want: REPORT_SCHEMA.into() });
        }
        let recomputed = aggregate(&report.rows, report.rate_per_minute)?;
        if recomputed != report.aggregates {
            return Err(ReportError::Inconsistent(format!(
                "stored {:?} vs recomputed {recomputed:?}",
                report.aggregates
            )));
        }
        Ok(report)
    }

    pub fn csv(&self) -> String {
        let mut out =
            String::from("command,target,success,queries,audio_seconds,l2,wall_time_ms\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.command,
                r.target.as_deref().unwrap_or(""),
                r.success,
                r.queries,
                r.audio_seconds,
                r.l2,
                r.wall_time_ms.map(|w| w.to_string()).unwrap_or_default(),
            ));
        }
        out
    }
}

/// Plot data: success rate against playback delay.
pub fn sweep_plot_tsv(rows: &[(u32, f64)]) -> String {
    let mut out = String::from("delay_ms\tsuccess_rate\n");
    for (delay, rate) in rows {
        out.push_str(&format!("{delay}\t{rate}\n"));
    }
    out
}

/// Plot data: fine-tune trace, distortion against queries spent.
pub fn trace_plot_tsv(trace: &[TracePoint]) -> String {
    let mut out = String::from("queries\tl2\n");
    for p in trace {
        out.push_str(&format!("{}\t{}\n", p.query_count, p.l2));
    }
    out
}

/// Plot data: post-defense success rates. Requires the undefended baseline
/// ("none") row so the plot is interpretable.
pub fn defense_plot_tsv(reports: &[DefenseReport]) -> Result<String, ReportError> {
    if !reports.iter().any(|r| r.spec == "none") {
        return Err(ReportError::MissingBaseline);
    }
    let mut out = String::from("defense\tsuccess_rate\n");
    for r in reports {
        out.push_str(&format!("{}\t{}\n", r.spec, r.success_after));
    }
    Ok(out)
}
