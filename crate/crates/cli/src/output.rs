use std::io::Write;

use pickfreeze::{Error, Result, VERSION};
use serde_json::{json, Value};

use crate::args::Format;

/// A result table with a fixed column order.
#[derive(Debug, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    /// Extra facts recorded next to the config echo.
    pub notes: Vec<(&'static str, Value)>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &'static str, value: Value) {
        self.notes.push((key, value));
    }
}

/// JSON number, or null for NaN and infinities.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Config(format!("cannot write output: {e}"))
}

pub fn render(table: &Table, format: Format, seed: u64, config: &Value) -> Result<Vec<u8>> {
    let mut meta = serde_json::Map::new();
    meta.insert("version".into(), json!(VERSION));
    meta.insert("seed".into(), json!(seed));
    meta.insert("config".into(), config.clone());
    for (k, v) in &table.notes {
        meta.insert((*k).into(), v.clone());
    }
    match format {
        Format::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|r| {
                    Value::Object(
                        table
                            .columns
                            .iter()
                            .map(|c| c.to_string())
                            .zip(r.iter().cloned())
                            .collect(),
                    )
                })
                .collect();
            let mut out = serde_json::to_vec_pretty(&json!({ "meta": meta, "rows": rows })).map_err(io_err)?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut out = Vec::new();
            writeln!(out, "# pickfreeze {VERSION}").map_err(io_err)?;
            writeln!(out, "# seed: {seed}").map_err(io_err)?;
            writeln!(out, "# config: {config}").map_err(io_err)?;
            for (k, v) in &table.notes {
                writeln!(out, "# {k}: {v}").map_err(io_err)?;
            }
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&table.columns).map_err(io_err)?;
            for r in &table.rows {
                w.write_record(r.iter().map(cell)).map_err(io_err)?;
            }
            w.into_inner().map_err(io_err)
        }
    }
}
