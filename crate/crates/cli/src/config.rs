//! Run configuration: JSON file plus command-line flags, flags winning.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// Bad flags, bad config keys or inputs that fail validation. Exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// On-site repulsion `U`, either finite or `inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Repulsion(pub f64);

impl Repulsion {
    /// `None` for infinite repulsion.
    pub fn finite(self) -> Option<f64> {
        self.0.is_finite().then_some(self.0)
    }
}

impl FromStr for Repulsion {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "inf" | "infinity" => Ok(Self(f64::INFINITY)),
            t => match t.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Ok(Self(v)),
                _ => Err(format!("expected a number >= 0 or `inf`, got {s:?}")),
            },
        }
    }
}

impl Serialize for Repulsion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Repulsion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::Number(n) => n
                .as_f64()
                .filter(|v| *v >= 0.0)
                .map(Self)
                .ok_or_else(|| serde::de::Error::custom("U must be >= 0")),
            Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            other => Err(serde::de::Error::custom(format!("bad U value {other}"))),
        }
    }
}

/// Shape of a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub subcommand: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub quadrature_points: Option<usize>,
    pub eigensolver_cap: Option<usize>,
    #[serde(default)]
    pub parameters: Map<String, Value>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("--config: cannot read {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("--config {}: {e}", path.display())))
    }
}

/// Overlay the flags on the file parameters and decode into `T`.
/// `T` rejects unknown keys, so typos in the file surface here.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: &Map<String, Value>) -> Result<T> {
    let mut merged = file.clone();
    if let Value::Object(m) = serde_json::to_value(flags)? {
        merged.extend(m.into_iter().filter(|(_, v)| !v.is_null()));
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| usage(format!("parameters: {e}")))
}

/// Everything a run depends on, after defaults are applied.
#[derive(Clone, Debug, Serialize)]
pub struct ResolvedConfig {
    pub subcommand: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub quadrature_points: Option<usize>,
    pub eigensolver_cap: usize,
    pub parameters: Value,
}

impl ResolvedConfig {
    /// SHA-256 over the canonical JSON of everything except the output directory.
    pub fn hash(&self) -> String {
        let canonical = serde_json::json!({
            "subcommand": self.subcommand,
            "seed": self.seed,
            "quadrature_points": self.quadrature_points,
            "eigensolver_cap": self.eigensolver_cap,
            "parameters": self.parameters,
        });
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }
}
