//! Key-value experiment config files and the flag > file > default merge.
//!
//! One `key = value` pair per line; `#` starts a comment. Lists are
//! comma-separated. Keys outside the run keys below must be fields of the
//! experiment's parameter struct, which rejects anything it does not know.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Keys handled by the runner rather than the experiment.
pub const RUN_KEYS: [&str; 5] = ["experiment", "seed", "output", "format", "threads"];

pub fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    if raw.contains(',') {
        return Value::Array(raw.split(',').map(parse_value).collect());
    }
    if let Ok(i) = raw.parse::<i64>() {
        return Value::from(i);
    }
    if let Ok(u) = raw.parse::<u64>() {
        return Value::from(u);
    }
    if let Ok(f) = raw.parse::<f64>() {
        if f.is_finite() {
            return Value::from(f);
        }
    }
    match raw {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => Value::String(raw.to_string()),
    }
}

pub fn parse_kv(text: &str) -> Result<Map<String, Value>> {
    let mut out = Map::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| anyhow!("line {}: expected `key = value`, got `{line}`", n + 1))?;
        let key = key.trim();
        if key.is_empty() {
            bail!("line {}: empty key", n + 1);
        }
        if out.insert(key.to_string(), parse_value(value)).is_some() {
            bail!("line {}: duplicate key `{key}`", n + 1);
        }
    }
    Ok(out)
}

pub fn read_kv(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_kv(&text).with_context(|| format!("in config {}", path.display()))
}

/// Settings of one run apart from the experiment parameters.
#[derive(Debug, Clone, Serialize)]
pub struct RunSettings {
    pub experiment: String,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: String,
    pub threads: Option<usize>,
}

/// Run-level flags as given on the command line.
#[derive(Debug, Clone, Default)]
pub struct RunFlags {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<String>,
    pub threads: Option<usize>,
}

pub const OUT_DIR_ENV: &str = "MASEP_OUT_DIR";
pub const DEFAULT_SEED: u64 = 1;

/// Splits a config file into run settings and experiment parameters and
/// applies the flag overrides to both.
pub fn resolve<P>(
    experiment: &str,
    file: Map<String, Value>,
    run: &RunFlags,
    flags: Map<String, Value>,
) -> Result<(RunSettings, P, Map<String, Value>)>
where
    P: Serialize + DeserializeOwned + Default,
{
    let mut file_params = Map::new();
    let mut file_run = Map::new();
    for (k, v) in file {
        if RUN_KEYS.contains(&k.as_str()) {
            file_run.insert(k, v);
        } else {
            file_params.insert(k, v);
        }
    }
    if let Some(id) = file_run.get("experiment") {
        if id.as_str() != Some(experiment) {
            bail!("config is for experiment {id}, not `{experiment}`");
        }
    }
    let seed = match (run.seed, file_run.get("seed")) {
        (Some(s), _) => s,
        (None, Some(v)) => v.as_u64().ok_or_else(|| anyhow!("seed must be a nonnegative integer, got {v}"))?,
        (None, None) => DEFAULT_SEED,
    };
    let format = match (&run.format, file_run.get("format")) {
        (Some(f), _) => f.clone(),
        (None, Some(v)) => v.as_str().ok_or_else(|| anyhow!("format must be a string, got {v}"))?.to_string(),
        (None, None) => "jsonl".to_string(),
    };
    if format != "jsonl" && format != "csv" {
        bail!("format must be `jsonl` or `csv`, got `{format}`");
    }
    let output = match (&run.output, file_run.get("output")) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(Value::String(s))) => Some(PathBuf::from(s)),
        (None, Some(v)) => bail!("output must be a path, got {v}"),
        (None, None) => std::env::var_os(OUT_DIR_ENV).map(PathBuf::from),
    };
    let threads = match (run.threads, file_run.get("threads")) {
        (Some(n), _) => Some(n),
        (None, Some(v)) => {
            Some(v.as_u64().ok_or_else(|| anyhow!("threads must be a positive integer, got {v}"))? as usize)
        }
        (None, None) => None,
    };

    let mut merged = match serde_json::to_value(P::default())? {
        Value::Object(m) => m,
        _ => unreachable!("parameter structs serialize to objects"),
    };
    for (k, v) in file_params.into_iter().chain(flags) {
        // a single value where the default is a list
        let v = match (merged.get(&k), v) {
            (Some(Value::Array(_)), v @ (Value::Number(_) | Value::String(_))) => Value::Array(vec![v]),
            (_, v) => v,
        };
        merged.insert(k, v);
    }
    let params: P = serde_json::from_value(Value::Object(merged.clone()))
        .map_err(|e| anyhow!("invalid {experiment} parameters: {e}"))?;
    let settings = RunSettings { experiment: experiment.to_string(), seed, output, format, threads };
    Ok((settings, params, merged))
}
