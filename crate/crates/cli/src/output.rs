use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

/// Significant digits kept for every float written to JSON.
pub const JSON_DIGITS: usize = 12;

pub const DEFAULT_TOL: f64 = 1e-8;

/// How a run ended badly. Usage errors exit with 2, numeric and validator
/// failures with 1 after printing a diagnostic JSON object.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numeric { kind: String, message: String },
    Validation { check: String, detail: Value },
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn diagnostic(&self, subcommand: &str) -> Value {
        match self {
            Failure::Usage(msg) => json!({ "status": "usage_error", "subcommand": subcommand, "message": msg }),
            Failure::Numeric { kind, message } => json!({ "status": "numeric_failure", "subcommand": subcommand, "error": kind, "message": message }),
            Failure::Validation { check, detail } => json!({ "status": "validation_failure", "subcommand": subcommand, "check": check, "detail": round_value(detail.clone()) }),
        }
    }
}

impl From<mtl_core::Error> for Failure {
    fn from(e: mtl_core::Error) -> Self {
        let debug = format!("{e:?}");
        let kind = debug.split(|ch: char| !ch.is_alphanumeric()).next().unwrap_or("Error").to_string();
        Failure::Numeric { kind, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

pub fn validate(ok: bool, check: &str, detail: Value) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(Failure::Validation { check: check.into(), detail })
    }
}

fn round_f64(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", JSON_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Round every float in a JSON tree to `JSON_DIGITS` significant digits.
pub fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n.as_f64().map(round_f64).and_then(serde_json::Number::from_f64).map(Value::Number).unwrap_or(Value::Null),
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let v = serde_json::to_value(value).map_err(|e| Failure::Numeric { kind: "Serialization".into(), message: e.to_string() })?;
    let mut s = serde_json::to_string_pretty(&round_value(v)).expect("serializing a JSON value");
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Write JSON to `out`, or to stdout when no path is given.
pub fn emit<T: Serialize>(value: &T, out: Option<&PathBuf>, outputs: &mut Vec<String>) -> CliResult<()> {
    let text = to_json(value)?;
    match out {
        Some(p) => {
            write_text(p, &text)?;
            outputs.push(p.display().to_string());
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Record of one invocation. Everything but `timing_ms` is a function of
/// the arguments and the environment.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub args: Vec<String>,
    pub inputs: Vec<String>,
    pub seed: Option<u64>,
    pub tolerance: f64,
    pub tolerance_source: String,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub status: String,
    pub timing_ms: f64,
}

/// Tolerance from the flag, then from MTL_TOL, then the default.
pub fn resolve_tolerance(flag: Option<f64>) -> CliResult<(f64, String)> {
    if let Some(t) = flag {
        return Ok((t, "flag".into()));
    }
    match std::env::var("MTL_TOL") {
        Ok(s) => {
            let t: f64 = s.trim().parse().map_err(|_| Failure::Usage(format!("MTL_TOL is not a number: '{s}'")))?;
            if !(t > 0.0) {
                return Err(Failure::Usage(format!("MTL_TOL must be positive, got {t}")));
            }
            Ok((t, "MTL_TOL".into()))
        }
        Err(_) => Ok((DEFAULT_TOL, "default".into())),
    }
}
