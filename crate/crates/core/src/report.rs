//! JSON and CSV artifacts. Every file carries the resolved config and the module versions.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;

pub const MODULES: [&str; 8] = ["potential", "scattering", "born", "spheroidal", "thermal", "fgr", "oracle", "cli"];

pub fn module_versions() -> BTreeMap<String, String> {
    MODULES.iter().map(|m| (m.to_string(), env!("CARGO_PKG_VERSION").to_string())).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">")]
    Above,
}

/// One acceptance comparison `value relation threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        let passed = match relation {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast => value >= threshold,
            Relation::Below => value < threshold,
            Relation::Above => value > threshold,
        };
        Check { name: name.into(), value, relation, threshold, passed }
    }

    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, Relation::AtMost, threshold)
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, Relation::AtLeast, threshold)
    }

    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, Relation::Below, threshold)
    }

    pub fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, Relation::Above, threshold)
    }
}

/// Top-level document written as `<command>.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub versions: BTreeMap<String, String>,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    /// Names of the failed checks.
    pub failures: Vec<String>,
    pub result: serde_json::Value,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig, checks: Vec<Check>, result: serde_json::Value) -> Self {
        let failures = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
        Report { command: command.into(), versions: module_versions(), config: config.clone(), checks, failures, result }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Numeric table written as CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn preamble(config: &RunConfig) -> String {
    let mut s = String::new();
    for (m, v) in module_versions() {
        s.push_str(&format!("# version {m} = {v}\n"));
    }
    for line in config.to_text().lines() {
        s.push_str(&format!("# config {line}\n"));
    }
    s
}

pub fn write_csv(dir: &Path, config: &RunConfig, table: &Table) -> Result<PathBuf> {
    let path = dir.join(format!("{}.csv", table.name));
    let mut buf = preamble(config).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row.iter().map(|x| format_f64(*x)))?;
        }
        w.flush()?;
    }
    fs::write(&path, buf)?;
    Ok(path)
}

pub fn write_json(dir: &Path, report: &Report) -> Result<PathBuf> {
    let path = dir.join(format!("{}.json", report.command));
    let mut f = fs::File::create(&path)?;
    serde_json::to_writer_pretty(&mut f, report)?;
    f.write_all(b"\n")?;
    Ok(path)
}

/// Reads a CSV written by [`write_csv`], skipping the `#` preamble.
pub fn read_csv(path: &Path) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(
            rec.iter()
                .map(|s| s.parse::<f64>().map_err(|e| crate::ThermionError::Config(format!("{}: {e}", path.display()))))
                .collect::<Result<_>>()?,
        );
    }
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(Table { name, header, rows })
}
