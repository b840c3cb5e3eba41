use std::collections::BTreeMap;
use std::fmt::Display;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::stats::Pmf;
use crate::ENGINE_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

/// Outcome of one experiment. Everything here is a function of the
/// parameters and the master seed; wall-clock data lives elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub engine_version: String,
    pub master_seed: u64,
    pub params: Map<String, Value>,
    pub statistics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    /// Named distributions, outcome rendered as a string key.
    pub distributions: BTreeMap<String, BTreeMap<String, f64>>,
    /// Free-form qualifiers such as `finite-t`.
    pub labels: Vec<String>,
    pub pass: bool,
}

impl ExperimentReport {
    pub fn new(experiment: &str, master_seed: u64, params: &impl Serialize) -> Self {
        let params = match serde_json::to_value(params) {
            Ok(Value::Object(m)) => m,
            Ok(other) => {
                let mut m = Map::new();
                m.insert("value".into(), other);
                m
            }
            Err(e) => {
                let mut m = Map::new();
                m.insert("serialization_error".into(), Value::String(e.to_string()));
                m
            }
        };
        ExperimentReport {
            experiment: experiment.to_string(),
            engine_version: ENGINE_VERSION.to_string(),
            master_seed,
            params,
            statistics: BTreeMap::new(),
            checks: Vec::new(),
            distributions: BTreeMap::new(),
            labels: Vec::new(),
            pass: true,
        }
    }

    pub fn stat(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.statistics.insert(name.into(), json_safe(value));
        self
    }

    fn check(&mut self, name: impl Into<String>, value: f64, threshold: f64, comparison: Comparison) -> bool {
        let pass = match comparison {
            Comparison::AtMost => value <= threshold,
            Comparison::AtLeast => value >= threshold,
        };
        let (value, threshold) = (json_safe(value), json_safe(threshold));
        self.checks.push(Check { name: name.into(), value, threshold, comparison, pass });
        self.pass &= pass;
        pass
    }

    pub fn check_at_most(&mut self, name: impl Into<String>, value: f64, threshold: f64) -> bool {
        self.check(name, value, threshold, Comparison::AtMost)
    }

    pub fn check_at_least(&mut self, name: impl Into<String>, value: f64, threshold: f64) -> bool {
        self.check(name, value, threshold, Comparison::AtLeast)
    }

    /// Boolean check recorded as `1 >= 1` or `0 >= 1`.
    pub fn check_true(&mut self, name: impl Into<String>, ok: bool) -> bool {
        self.check(name, if ok { 1.0 } else { 0.0 }, 1.0, Comparison::AtLeast)
    }

    pub fn distribution<K: Ord + Clone + Display>(&mut self, name: impl Into<String>, pmf: &Pmf<K>) -> &mut Self {
        self.distributions.insert(name.into(), pmf.iter().map(|(k, &p)| (k.to_string(), p)).collect());
        self
    }

    pub fn label(&mut self, label: impl Into<String>) -> &mut Self {
        self.labels.push(label.into());
        self
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Single-line JSON; floats use shortest round-trip formatting.
    pub fn to_jsonl(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub const CSV_HEADER: &'static str = "experiment,master_seed,kind,name,value,threshold,pass";

    /// Summary rows: one per statistic and one per check.
    pub fn csv_rows(&self) -> Vec<String> {
        let mut rows = Vec::with_capacity(self.statistics.len() + self.checks.len());
        for (name, v) in &self.statistics {
            rows.push(format!("{},{},statistic,{},{},,", self.experiment, self.master_seed, csv_field(name), v));
        }
        for c in &self.checks {
            rows.push(format!(
                "{},{},check,{},{},{},{}",
                self.experiment,
                self.master_seed,
                csv_field(&c.name),
                c.value,
                c.threshold,
                c.pass
            ));
        }
        rows
    }
}

/// JSON has no infinities: they are stored as `±f64::MAX`.
fn json_safe(v: f64) -> f64 {
    if v.is_infinite() {
        v.signum() * f64::MAX
    } else {
        v
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Renders an outcome vector as `a/b/c` for report keys.
pub fn join_key(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join("/")
}
