//! The JSON envelope every command writes.

use serde::Serialize;
use serde_json::{Map, Value};

pub const REPORT_SCHEMA: &str = "docs/schema/report.schema.json";

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Arguments as given, after the program name.
    pub args: Vec<String>,
    pub system: Option<String>,
    /// Every tolerance, step and sample count the verdicts depend on.
    pub tolerances: Map<String, Value>,
    pub result: Value,
    pub wall_time_ms: f64,
}

impl Report {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        Report {
            tool: "stabkit",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            args,
            system: None,
            tolerances: Map::new(),
            result: Value::Null,
            wall_time_ms: 0.0,
        }
    }
}

/// Builds a tolerance map from `(name, value)` pairs.
pub fn tolerances<I, V>(pairs: I) -> Map<String, Value>
where
    I: IntoIterator<Item = (&'static str, V)>,
    V: Into<Value>,
{
    pairs.into_iter().map(|(k, v)| (k.to_string(), v.into())).collect()
}
