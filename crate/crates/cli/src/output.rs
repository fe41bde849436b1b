use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

use crate::config::Format;

pub const UNITS_NOTE: &str = "units: energies in units of J, beta in 1/J, lambda dimensionless";

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Missing,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Num)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Int(k) => k.to_string(),
            Cell::Text(s) => {
                if s.contains([',', '"', '\n']) {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.clone()
                }
            }
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(_) | Cell::Missing => Value::Null,
            Cell::Int(k) => json!(k),
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }
}

/// Metadata lines written as `# ` comments (CSV) or a string array (JSON).
pub fn metadata(command: &str, echo: &[String], extra: &[String]) -> Vec<String> {
    let mut m = vec![
        format!("thermoqsl {}", env!("CARGO_PKG_VERSION")),
        format!("command: {command}"),
    ];
    m.extend(echo.iter().map(|l| format!("config: {l}")));
    m.push(UNITS_NOTE.to_string());
    m.extend(extra.iter().cloned());
    m
}

pub fn render(table: &Table, meta: &[String], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut s = String::new();
            for line in meta {
                s.push_str("# ");
                s.push_str(line);
                s.push('\n');
            }
            s.push_str(&table.columns.join(","));
            s.push('\n');
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let mut cols = Map::new();
            for (k, name) in table.columns.iter().enumerate() {
                let values: Vec<Value> = table.rows.iter().map(|r| r[k].json()).collect();
                cols.insert((*name).to_string(), Value::Array(values));
            }
            let doc = json!({ "metadata": meta, "columns": cols });
            let mut s = serde_json::to_string_pretty(&doc).expect("JSON values are finite");
            s.push('\n');
            s
        }
    }
}

/// Writes to `path`, or stdout when `None`.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)
                    .with_context(|| format!("creating directory {}", dir.display()))?;
            }
            fs::write(p, contents).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(contents.as_bytes()).context("writing to stdout")?;
            out.flush().context("writing to stdout")
        }
    }
}
