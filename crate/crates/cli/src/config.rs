//! Flat key = value experiment configuration. Lines are `key = value`,
//! blank lines and `#` comments are ignored, keys use the same names as the
//! long CLI flags, and a flag given on the command line always wins over
//! the file.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

/// Every key the file format accepts. An unknown key is an error instead of
/// a silent no-op so a typo cannot quietly run a different experiment.
pub const KNOWN_KEYS: &[&str] = &[
    "oracle",
    "bank",
    "carrier",
    "command",
    "target",
    "mode",
    "out",
    "seed",
    "rate-per-minute",
    "budget",
    "init-failures",
    "probes",
    "sigma",
    "eta",
    "eta-floor",
    "sync-shifts",
    "sync-tau-ms",
    "epsilon-l2",
    "noise-cap",
    "band",
    "weak-sync",
    "count-rejection-as-success",
    "auth-env",
];

#[derive(Debug, Default)]
pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut values = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    lineno + 1
                ));
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(format!(
                    "{}:{}: unknown key `{key}` (known: {})",
                    path.display(),
                    lineno + 1,
                    KNOWN_KEYS.join(", ")
                ));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        debug_assert!(KNOWN_KEYS.contains(&key), "asked for undocumented key {key}");
        self.values.get(key).map(String::as_str)
    }

    /// Typed lookup; a present-but-unparseable value is an error.
    pub fn parsed<T>(&self, key: &str) -> Result<Option<T>, String>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| format!("config key `{key}`: cannot parse `{raw}`: {e}")),
        }
    }
}

/// Parses a perturbation band: `none` or `LOW:HIGH` in Hz.
pub fn parse_band(raw: &str) -> Result<Option<(f64, f64)>, String> {
    if raw == "none" {
        return Ok(None);
    }
    let Some((lo, hi)) = raw.split_once(':') else {
        return Err(format!("band must be `none` or `LOW:HIGH` in Hz, got `{raw}`"));
    };
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad band low edge `{lo}`"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad band high edge `{hi}`"))?;
    Ok(Some((lo, hi)))
}
