//! Provider-agnostic client for remote speech-to-text REST services.
//!
//! Request: HTTP POST of the clip as a 16-bit PCM WAV, either as the raw
//! request body or wrapped base64 in a JSON field. Auth is a bearer token
//! read from an environment variable. The transcript is extracted from the
//! response JSON by a configurable dot path; an empty transcript maps to
//! [`Transcript::Rejected`].
//!
//! Stub-server protocol for tests: any HTTP server that accepts the POST
//! and answers `200` with a JSON body containing the transcript at the
//! configured path. `5xx` and transport errors are retried with exponential
//! backoff; `401`/`403` fail immediately as auth errors; other `4xx` fail
//! immediately as request errors.

use std::io::Cursor;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use base64::Engine as _;

use crate::audio::AudioClip;
use crate::oracle::{Oracle, OracleError, Transcript};

/// How the WAV bytes travel in the POST body.
#[derive(Debug, Clone)]
pub enum BodyEncoding {
    /// Raw WAV bytes, `Content-Type: audio/wav`.
    Binary,
    /// `{"<field>": "<base64 wav>"}`, `Content-Type: application/json`.
    JsonBase64 { field: String },
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub url: String,
    /// Name of the environment variable holding the bearer token. Empty
    /// string disables the Authorization header.
    pub auth_env: String,
    pub body: BodyEncoding,
    /// Dot path into the response JSON, e.g. "result.transcript".
    pub transcript_path: String,
    pub timeout_ms: u64,
    /// First retry delay; doubles per attempt.
    pub retry_base_ms: u64,
    /// Total attempts including the first.
    pub max_attempts: u32,
    /// Provider-side duration limit per request.
    pub max_seconds: f64,
    /// Client-side throttle between request starts (100 ms caps the
    /// request rate at 10 per second).
    pub min_interval_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> RemoteConfig {
        RemoteConfig {
            url: String::new(),
            auth_env: "STT_API_TOKEN".to_string(),
            body: BodyEncoding::Binary,
            transcript_path: "transcript".to_string(),
            timeout_ms: 10_000,
            retry_base_ms: 200,
            max_attempts: 3,
            max_seconds: 60.0,
            min_interval_ms: 100,
        }
    }
}

pub struct RemoteOracle {
    config: RemoteConfig,
    agent: ureq::Agent,
    last_request: Mutex<Option<Instant>>,
}

impl RemoteOracle {
    pub fn new(config: RemoteConfig) -> RemoteOracle {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        RemoteOracle { config, agent, last_request: Mutex::new(None) }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn throttle(&self) {
        let min = Duration::from_millis(self.config.min_interval_ms);
        if min.is_zero() {
            return;
        }
        // Hold the slot lock across the sleep so concurrent callers are
        // serialized at the configured rate rather than bursting.
        let mut slot = self.last_request.lock().expect("throttle lock poisoned");
        if let Some(prev) = *slot {
            let since = prev.elapsed();
            if since < min {
                std::thread::sleep(min - since);
            }
        }
        *slot = Some(Instant::now());
    }

    fn send(&self, wav: &[u8]) -> Result<serde_json::Value, OracleError> {
        let token = if self.config.auth_env.is_empty() {
            None
        } else {
            std::env::var(&self.config.auth_env).ok()
        };
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.throttle();
            let mut req = self.agent.post(&self.config.url);
            if let Some(tok) = &token {
                req = req.set("Authorization", &format!("Bearer {tok}"));
            }
            let result = match &self.config.body {
                BodyEncoding::Binary => req
                    .set("Content-Type", "audio/wav")
                    .send_bytes(wav),
                BodyEncoding::JsonBase64 { field } => {
                    let payload = serde_json::json!({
                        field.as_str(): base64::engine::general_purpose::STANDARD.encode(wav),
                    });
                    req.set("Content-Type", "application/json")
                        .send_string(&payload.to_string())
                }
            };
            match result {
                Ok(resp) => {
                    return resp.into_json::<serde_json::Value>().map_err(|e| {
                        OracleError::Request(format!("response is not JSON: {e}"))
                    });
                }
                Err(ureq::Error::Status(code @ (401 | 403), _)) => {
                    return Err(OracleError::Auth(format!("HTTP {code}")));
                }
                Err(ureq::Error::Status(code, resp)) if code < 500 => {
                    let body = resp.into_string().unwrap_or_default();
                    return Err(OracleError::Request(format!("HTTP {code}: {body}")));
                }
                Err(err) => {
                    // 5xx or transport: transient, retry with backoff.
                    if attempt >= self.config.max_attempts {
                        return Err(OracleError::Unavailable(format!(
                            "{} attempts failed, last error: {err}",
                            self.config.max_attempts
                        )));
                    }
                    let delay = self.config.retry_base_ms << (attempt - 1);
                    std::thread::sleep(Duration::from_millis(delay));
                }
            }
        }
    }
}

impl Oracle for RemoteOracle {
    fn transcribe(&self, clip: &AudioClip) -> Result<Transcript, OracleError> {
        if clip.duration_seconds() > self.config.max_seconds {
            return Err(OracleError::BadInput(format!(
                "clip is {:.1}s, provider limit is {:.1}s",
                clip.duration_seconds(),
                self.config.max_seconds
            )));
        }
        let wav = encode_wav(clip)?;
        let json = self.send(&wav)?;
        let raw = lookup_path(&json, &self.config.transcript_path).ok_or_else(|| {
            OracleError::Request(format!(
                "no string at response path {:?}",
                self.config.transcript_path
            ))
        })?;
        Ok(Transcript::from_raw(raw))
    }
}

/// Serializes a clip as a mono 16-bit PCM WAV in memory.
fn encode_wav(clip: &AudioClip) -> Result<Vec<u8>, OracleError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut cursor, spec)
            .map_err(|e| OracleError::BadInput(format!("WAV encode: {e}")))?;
        for &s in clip.samples() {
            let v = (s * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16;
            writer
                .write_sample(v)
                .map_err(|e| OracleError::BadInput(format!("WAV encode: {e}")))?;
        }
        writer
            .finalize()
            .map_err(|e| OracleError::BadInput(format!("WAV encode: {e}")))?;
    }
    Ok(cursor.into_inner())
}

/// Resolves "a.b.c" against nested JSON objects to a string value.
fn lookup_path<'a>(json: &'a serde_json::Value, path: &str) -> Option<&'a str> {
    let mut node = json;
    for key in path.split('.') {
        node = node.get(key)?;
    }
    node.as_str()
}
