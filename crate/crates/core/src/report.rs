//! Sweep reports: one axis, named metric columns, CSV/JSON export.
//!
//! Float formatting uses Rust's shortest round-trip representation, so a
//! report serializes to byte-identical text whenever the values are
//! bit-identical.

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub axis_name: String,
    pub axis_values: Vec<f64>,
    /// Insertion-ordered metric columns; every column has axis length.
    metrics: Vec<(String, Vec<f64>)>,
    pub metadata: Value,
}

impl SweepReport {
    pub fn new(axis_name: impl Into<String>, axis_values: Vec<f64>) -> Self {
        Self {
            axis_name: axis_name.into(),
            axis_values,
            metrics: Vec::new(),
            metadata: json!({}),
        }
    }

    pub fn push_metric(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.axis_values.len() {
            return Err(Error::LengthMismatch {
                expected: self.axis_values.len(),
                got: values.len(),
            });
        }
        self.metrics.push((name.into(), values));
        Ok(())
    }

    pub fn metric(&self, name: &str) -> Option<&[f64]> {
        self.metrics
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn metric_names(&self) -> impl Iterator<Item = &str> {
        self.metrics.iter().map(|(n, _)| n.as_str())
    }

    /// Long-format CSV: axis column followed by one column per metric.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.axis_name);
        for (name, _) in &self.metrics {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (i, x) in self.axis_values.iter().enumerate() {
            out.push_str(&format!("{x}"));
            for (_, col) in &self.metrics {
                out.push_str(&format!(",{}", col[i]));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        let metrics: serde_json::Map<String, Value> = self
            .metrics
            .iter()
            .map(|(n, v)| (n.clone(), json!(v)))
            .collect();
        let doc = json!({
            "axis_name": self.axis_name,
            "axis_values": self.axis_values,
            "metrics": Value::Object(metrics),
            "metadata": self.metadata,
        });
        serde_json::to_string_pretty(&doc).expect("report serialization cannot fail")
    }
}
