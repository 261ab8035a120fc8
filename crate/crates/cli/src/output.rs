//! Result envelope and its JSON / CSV writers.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub tool_version: String,
    pub command: String,
    pub params: BTreeMap<String, Value>,
    pub seed: Option<u64>,
    pub results: Vec<Value>,
    pub diagnostics: BTreeMap<String, Value>,
}

impl Envelope {
    pub fn new(command: &str) -> Self {
        Envelope {
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            params: BTreeMap::new(),
            seed: None,
            results: Vec::new(),
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.params.insert(key.to_string(), to_value(value));
        self
    }

    pub fn diag(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.diagnostics.insert(key.to_string(), to_value(value));
        self
    }

    pub fn push(&mut self, row: impl Serialize) {
        self.results.push(to_value(row));
    }
}

/// Serialize to a JSON value; non-finite floats become `null`.
pub fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

pub fn write_json(env: &Envelope, out: &mut dyn Write) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(env).map_err(std::io::Error::other)?;
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, String>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        Value::Array(items) => {
            let cells: Vec<String> = items.iter().map(cell).collect();
            out.insert(prefix.to_string(), cells.join(";"));
        }
        other => {
            out.insert(prefix.to_string(), cell(other));
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// One CSV row per result record; nested objects become dotted columns and
/// arrays are joined with `;`. Columns are the sorted union of keys.
pub fn write_csv(env: &Envelope, out: &mut dyn Write) -> std::io::Result<()> {
    let rows: Vec<BTreeMap<String, String>> = env
        .results
        .iter()
        .map(|r| {
            let mut m = BTreeMap::new();
            flatten("", r, &mut m);
            m
        })
        .collect();
    let mut columns: Vec<String> = rows.iter().flat_map(|r| r.keys().cloned()).collect();
    columns.sort();
    columns.dedup();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&columns)?;
    for r in &rows {
        w.write_record(columns.iter().map(|c| r.get(c).map(String::as_str).unwrap_or("")))?;
    }
    w.flush()
}
