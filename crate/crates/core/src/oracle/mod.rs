//! Hard-label oracle abstraction: transcripts, query accounting, the
//! response cache, and cost estimation. Concrete oracles live in the
//! submodules (surrogate keyword spotter, remote HTTP adapter, synthetic
//! linear oracle).

pub mod linear;
pub mod mfcc;
pub mod remote;
pub mod surrogate;

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::AudioClip;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle unavailable: {0}")]
    Unavailable(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("bad request or response: {0}")]
    Request(String),
    #[error("unsuitable input: {0}")]
    BadInput(String),
}

/// A hard-label oracle response: either a decoded transcript or a rejection
/// (the oracle produced no usable text).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transcript {
    Text(String),
    Rejected,
}

impl Transcript {
    /// Builds a transcript from raw provider text, normalizing it; empty or
    /// punctuation-only text becomes `Rejected`.
    pub fn from_raw(raw: &str) -> Transcript {
        let norm = normalize_text(raw);
        if norm.is_empty() {
            Transcript::Rejected
        } else {
            Transcript::Text(norm)
        }
    }

    pub fn is_rejected(&self) -> bool {
        matches!(self, Transcript::Rejected)
    }

    pub fn text(&self) -> Option<&str> {
        match self {
            Transcript::Text(t) => Some(t),
            Transcript::Rejected => None,
        }
    }
}

/// Canonical transcript form: lowercase, punctuation mapped to spaces,
/// whitespace runs collapsed, ends trimmed.
pub fn normalize_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for c in raw.chars() {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            for lc in c.to_lowercase() {
                out.push(lc);
            }
        } else {
            pending_space = true;
        }
    }
    out
}

/// Anything that turns audio into a hard-label transcript.
pub trait Oracle: Send + Sync {
    fn transcribe(&self, clip: &AudioClip) -> Result<Transcript, OracleError>;

    /// Sample rate the oracle expects submissions at.
    fn sample_rate(&self) -> u32 {
        crate::audio::CANONICAL_RATE
    }
}

/// Which stage of an attack issued a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryPhase {
    Init,
    Gradient,
    FineTune,
    Eval,
}

/// Query accounting for one attack run. Counts only real oracle round
/// trips; cache hits and failed transport attempts do not count.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryLedger {
    pub total_queries: u64,
    pub total_audio_seconds: f64,
    pub init_queries: u64,
    pub gradient_queries: u64,
    pub finetune_queries: u64,
    pub eval_queries: u64,
}

impl QueryLedger {
    pub fn record(&mut self, phase: QueryPhase, audio_seconds: f64) {
        self.total_queries += 1;
        self.total_audio_seconds += audio_seconds;
        match phase {
            QueryPhase::Init => self.init_queries += 1,
            QueryPhase::Gradient => self.gradient_queries += 1,
            QueryPhase::FineTune => self.finetune_queries += 1,
            QueryPhase::Eval => self.eval_queries += 1,
        }
    }

    /// Conservation check: the total equals the sum of per-phase counts.
    pub fn is_consistent(&self) -> bool {
        self.total_queries
            == self.init_queries + self.gradient_queries + self.finetune_queries + self.eval_queries
    }
}

/// Dollar cost of the queries in a ledger at a per-minute audio price.
pub fn estimate_cost(ledger: &QueryLedger, rate_per_minute: f64) -> f64 {
    (ledger.total_audio_seconds / 60.0) * rate_per_minute
}

struct SessionState {
    ledger: QueryLedger,
    cache: HashMap<[u8; 32], Transcript>,
}

/// One attack run's view of an oracle: counts queries per phase and caches
/// transcripts by content digest so repeated submissions of identical audio
/// are free. Thread safe.
pub struct QuerySession<'a> {
    oracle: &'a dyn Oracle,
    state: Mutex<SessionState>,
}

impl<'a> QuerySession<'a> {
    pub fn new(oracle: &'a dyn Oracle) -> QuerySession<'a> {
        QuerySession {
            oracle,
            state: Mutex::new(SessionState {
                ledger: QueryLedger::default(),
                cache: HashMap::new(),
            }),
        }
    }

    pub fn oracle(&self) -> &dyn Oracle {
        self.oracle
    }

    /// Queries the oracle, recording exactly one ledger increment. Errors do
    /// not count against the ledger.
    pub fn query(
        &self,
        clip: &AudioClip,
        phase: QueryPhase,
    ) -> Result<Transcript, OracleError> {
        let transcript = self.oracle.transcribe(clip)?;
        let mut state = self.state.lock().expect("session lock");
        state.ledger.record(phase, clip.duration_seconds());
        state.cache.insert(digest(clip), transcript.clone());
        Ok(transcript)
    }

    /// Like `query`, but a content-digest cache hit returns the stored
    /// transcript without touching the oracle or the ledger.
    pub fn cached_query(
        &self,
        clip: &AudioClip,
        phase: QueryPhase,
    ) -> Result<Transcript, OracleError> {
        let key = digest(clip);
        {
            let state = self.state.lock().expect("session lock");
            if let Some(hit) = state.cache.get(&key) {
                return Ok(hit.clone());
            }
        }
        let transcript = self.oracle.transcribe(clip)?;
        let mut state = self.state.lock().expect("session lock");
        state.ledger.record(phase, clip.duration_seconds());
        state.cache.insert(key, transcript.clone());
        Ok(transcript)
    }

    pub fn ledger(&self) -> QueryLedger {
        self.state.lock().expect("session lock").ledger.clone()
    }

    pub fn total_queries(&self) -> u64 {
        self.state.lock().expect("session lock").ledger.total_queries
    }
}

fn digest(clip: &AudioClip) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(clip.sample_rate().to_le_bytes());
    for s in clip.samples() {
        hasher.update(s.to_le_bytes());
    }
    hasher.finalize().into()
}
