//! Writing artifacts.
//!
//! JSON artifacts are one object `{"meta": .., "data": ..}`. CSV artifacts
//! carry the same `meta` object on a leading `# ` line, then a header row.
//! Both end every line with LF.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use crate::config::Format;
use crate::error::CliError;

/// A rectangular table; `None` cells are written empty in CSV.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, meta: &Value) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {meta}");
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| c.map(|v| v.to_string()).unwrap_or_default())
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub struct Artifact {
    pub meta: Value,
    pub data: Value,
    /// Full CSV text, including the metadata line.
    pub csv: String,
}

impl Artifact {
    pub fn from_table(meta: Value, data: Value, table: &Table) -> Self {
        let csv = table.to_csv(&meta);
        Self { meta, data, csv }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.csv.clone(),
            Format::Json => {
                let doc = json!({ "meta": self.meta, "data": self.data });
                let mut s = serde_json::to_string_pretty(&doc).expect("artifact serializes");
                s.push('\n');
                s
            }
        }
    }

    /// Writes to `out`, or to stdout when no path is given.
    pub fn write(&self, format: Format, out: Option<&Path>) -> Result<(), CliError> {
        let text = self.render(format);
        match out {
            Some(path) => std::fs::write(path, text)
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(text.as_bytes())
                    .and_then(|_| stdout.flush())
                    .map_err(|e| CliError::Input(format!("cannot write to stdout: {e}")))
            }
        }
    }
}

/// Prints the one-line run summary where it will not mix with the artifact.
pub fn summary(line: &str, out: Option<&Path>) {
    if out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

/// `1.500000` -> `1.5`, `1.000000` -> `1`.
pub fn trimmed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if !s.contains('.') {
        return s;
    }
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_owned()
    } else {
        s.to_owned()
    }
}
