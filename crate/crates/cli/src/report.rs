use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

/// Outcome of one invocation. The text form is derived from the JSON form
/// so both always carry the same fields.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub status: &'static str,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub stages: Vec<StageRecord>,
    pub oracle_calls: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
    pub outputs: BTreeMap<String, Value>,
    #[serde(skip)]
    timings: bool,
}

/// A stage failure, already recorded in the report.
#[derive(Debug)]
pub struct Failed;

impl RunReport {
    pub fn new(command: &str, timings: bool) -> Self {
        Self {
            command: command.to_string(),
            status: "ok",
            exit_code: 0,
            failed_stage: None,
            error: None,
            stages: Vec::new(),
            oracle_calls: BTreeMap::new(),
            warnings: Vec::new(),
            outputs: BTreeMap::new(),
            timings,
        }
    }

    /// Runs one named stage, recording its duration and any failure.
    pub fn stage<T, E: std::fmt::Display>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Self) -> Result<T, E>,
    ) -> Result<T, Failed> {
        let start = Instant::now();
        let result = f(self);
        let seconds = self.timings.then(|| start.elapsed().as_secs_f64());
        self.stages.push(StageRecord {
            name: name.to_string(),
            seconds,
        });
        result.map_err(|e| self.fail(name, e))
    }

    pub fn fail(&mut self, stage: &str, error: impl std::fmt::Display) -> Failed {
        self.status = "failed";
        self.exit_code = 1;
        self.failed_stage = Some(stage.to_string());
        self.error = Some(error.to_string());
        Failed
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn output(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("output serializes");
        self.outputs.insert(key.to_string(), value);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut out = String::new();
        flatten("", &value, &mut out);
        out
    }
}

fn flatten(prefix: &str, value: &Value, out: &mut String) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match value {
        Value::Object(map) if !map.is_empty() => {
            for (k, v) in map {
                flatten(&key(k), v, out);
            }
        }
        Value::Array(items) if !items.is_empty() && items.iter().any(|v| v.is_object() || v.is_array()) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), v, out);
            }
        }
        Value::String(s) => {
            let _ = writeln!(out, "{prefix}: {s}");
        }
        other => {
            let _ = writeln!(out, "{prefix}: {other}");
        }
    }
}
