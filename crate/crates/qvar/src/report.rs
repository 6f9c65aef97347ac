//! JSON and CSV run reports.
//!
//! Every JSON report is an object with the fields
//!
//! | field            | type    | content                                        |
//! |------------------|---------|------------------------------------------------|
//! | `schema_version` | integer | currently 1                                    |
//! | `command`        | string  | subcommand name                                |
//! | `config`         | object  | the fully resolved run configuration           |
//! | `timestamp`      | string  | RFC 3339 UTC time of the run                   |
//! | `results`        | object  | command-specific results                       |
//! | `checks`         | array   | `{name, relation, lhs, rhs, tolerance, pass}`  |
//! | `passed`         | boolean | conjunction of all `pass` flags                |
//!
//! A check with relation `<=` passes when `lhs <= rhs + tolerance`, `=`
//! when `|lhs − rhs| <= tolerance` and `<` when `lhs < rhs`. The timestamp
//! is the only field that differs between repeated runs.

use qvar_core::variance_lab::{BoundCheck, Relation};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

pub const SCHEMA_VERSION: u64 = 1;

/// Absolute slack so that exactly vanishing quantities compare equal.
const FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub relation: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn less_eq(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let pass = lhs <= rhs + tolerance + FLOOR;
        Self { name: name.into(), relation: "<=".into(), lhs, rhs, tolerance, pass }
    }

    pub fn equal(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let pass = (lhs - rhs).abs() <= tolerance + FLOOR;
        Self { name: name.into(), relation: "=".into(), lhs, rhs, tolerance, pass }
    }

    pub fn less(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self { name: name.into(), relation: "<".into(), lhs, rhs, tolerance: 0.0, pass: lhs < rhs }
    }

    pub fn from_bound(b: &BoundCheck, suffix: &str) -> Self {
        let name = format!("{}{suffix}", b.name);
        match b.relation {
            Relation::LessEq => Self::less_eq(name, b.lhs, b.rhs, b.margin),
            Relation::Equal => Self::equal(name, b.lhs, b.rhs, b.margin),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u64,
    pub command: String,
    pub config: Value,
    pub timestamp: String,
    pub results: Value,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Report {
    pub fn new(command: &str, config: Value, results: Value, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.pass);
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            config,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            results,
            checks,
            passed,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports serialize");
        text.push('\n');
        text
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Report text with the timestamp removed, for determinism comparisons.
pub fn without_timestamp(text: &str) -> Result<String, CliError> {
    let mut v: Value = serde_json::from_str(text).map_err(|e| CliError::Input(e.to_string()))?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timestamp");
    }
    Ok(serde_json::to_string_pretty(&v).expect("values serialize"))
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value, String> {
    obj.get(key).ok_or_else(|| format!("missing field `{key}`"))
}

/// Checks a parsed report against the documented schema.
pub fn validate_report(v: &Value) -> Result<(), String> {
    let obj = v.as_object().ok_or("report is not an object")?;
    const KEYS: [&str; 7] = ["schema_version", "command", "config", "timestamp", "results", "checks", "passed"];
    if let Some(extra) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(format!("unexpected field `{extra}`"));
    }
    if field(obj, "schema_version")?.as_u64() != Some(SCHEMA_VERSION) {
        return Err(format!("schema_version must be {SCHEMA_VERSION}"));
    }
    let command = field(obj, "command")?.as_str().ok_or("`command` is not a string")?;
    const COMMANDS: [&str; 6] = ["moments", "single-gate", "theorem1", "theorem2", "plateau-scan", "optimize"];
    if !COMMANDS.contains(&command) {
        return Err(format!("unknown command `{command}`"));
    }
    let config = field(obj, "config")?.as_object().ok_or("`config` is not an object")?;
    if config.get("command").and_then(Value::as_str) != Some(command) {
        return Err("`config.command` does not match `command`".into());
    }
    if !config.get("seed").is_some_and(Value::is_u64) {
        return Err("`config.seed` is not an unsigned integer".into());
    }
    let ts = field(obj, "timestamp")?.as_str().ok_or("`timestamp` is not a string")?;
    chrono::DateTime::parse_from_rfc3339(ts).map_err(|e| format!("`timestamp` is not RFC 3339: {e}"))?;
    if !field(obj, "results")?.is_object() {
        return Err("`results` is not an object".into());
    }
    let checks = field(obj, "checks")?.as_array().ok_or("`checks` is not an array")?;
    let mut all = true;
    for (i, c) in checks.iter().enumerate() {
        let check: Check = serde_json::from_value(c.clone()).map_err(|e| format!("checks[{i}]: {e}"))?;
        if !["<=", "=", "<"].contains(&check.relation.as_str()) {
            return Err(format!("checks[{i}]: unknown relation `{}`", check.relation));
        }
        all &= check.pass;
    }
    let passed = field(obj, "passed")?.as_bool().ok_or("`passed` is not a boolean")?;
    if passed != all {
        return Err("`passed` disagrees with the individual checks".into());
    }
    Ok(())
}

/// A CSV table with a fixed header.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

/// Shortest round-trip formatting, as used in the JSON output.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        String::new()
    }
}
