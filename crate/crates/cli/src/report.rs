//! Checks, tables and the run manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use lamesolve::C64;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }
}

/// Flat complex field written as `<name>.bin` (little-endian re, im pairs)
/// with a JSON header in `<name>.json`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub name: String,
    pub dims: Vec<usize>,
    pub extent: f64,
    pub data: Vec<C64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub fitted: BTreeMap<String, f64>,
    pub fields: Vec<FieldDump>,
}

impl Outcome {
    pub fn check(&mut self, name: &str, passed: bool, value: f64, threshold: &str, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, value, threshold: threshold.into(), detail: detail.into() });
    }

    /// Passes when value < limit.
    pub fn below(&mut self, name: &str, value: f64, limit: f64, detail: impl Into<String>) {
        self.check(name, value < limit, value, &format!("< {limit:e}"), detail);
    }

    /// Passes when |value - target| <= tol.
    pub fn near(&mut self, name: &str, value: f64, target: f64, tol: f64, detail: impl Into<String>) {
        self.check(name, (value - target).abs() <= tol, value, &format!("{target} +/- {tol}"), detail);
    }

    pub fn fit(&mut self, name: &str, v: f64) {
        self.fitted.insert(name.into(), v);
    }

    pub fn merge(&mut self, other: Outcome) {
        self.checks.extend(other.checks);
        self.tables.extend(other.tables);
        self.fitted.extend(other.fitted);
        self.fields.extend(other.fields);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub experiment: &'a str,
    pub version: &'static str,
    pub config: &'a ExperimentConfig,
    pub wall_time_s: f64,
    pub passed: bool,
    pub checks: &'a [Check],
    pub fitted: &'a BTreeMap<String, f64>,
    pub files: Vec<String>,
}

fn io(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

pub fn write_csv(table: &Table, path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(&table.header).map_err(io)?;
    for r in &table.rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_field(field: &FieldDump, dir: &Path) -> Result<Vec<String>, CliError> {
    let header = serde_json::json!({ "dims": field.dims, "extent": field.extent, "dtype": "complex128-le", "layout": "row-major" });
    let json = format!("{}.json", field.name);
    let bin = format!("{}.bin", field.name);
    std::fs::write(dir.join(&json), serde_json::to_string_pretty(&header).map_err(io)?).map_err(io)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(&bin)).map_err(io)?);
    for v in &field.data {
        f.write_all(&v.re.to_le_bytes()).map_err(io)?;
        f.write_all(&v.im.to_le_bytes()).map_err(io)?;
    }
    f.flush().map_err(io)?;
    Ok(vec![json, bin])
}

/// Writes tables, fields and manifest.json into `dir`; returns the manifest text.
pub fn write_outputs(experiment: &str, outcome: &Outcome, cfg: &ExperimentConfig, wall_time_s: f64, dir: &Path) -> Result<String, CliError> {
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut files = Vec::new();
    for t in &outcome.tables {
        let name = format!("{}.csv", t.name);
        write_csv(t, &dir.join(&name))?;
        files.push(name);
    }
    for f in &outcome.fields {
        files.extend(write_field(f, dir)?);
    }
    let manifest = Manifest {
        experiment,
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        wall_time_s,
        passed: outcome.passed(),
        checks: &outcome.checks,
        fitted: &outcome.fitted,
        files,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(io)?;
    std::fs::write(dir.join("manifest.json"), &text).map_err(io)?;
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outputs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = Outcome::default();
        o.below("small", 1e-3, 1e-2, "ok");
        o.near("slope", -0.9, -0.875, 0.1, "");
        o.fit("c", 2.5);
        let mut t = Table::new("rows", &["a", "b"]);
        t.push(["1".to_string(), "x,y".to_string()]);
        o.tables.push(t);
        o.fields.push(FieldDump { name: "u".into(), dims: vec![2], extent: 1.0, data: vec![C64::new(1.0, -2.0), C64::new(0.5, 0.0)] });
        let text = write_outputs("demo", &o, &ExperimentConfig::default(), 0.1, dir.path()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["passed"], true);
        assert_eq!(v["fitted"]["c"], 2.5);
        let csv = std::fs::read_to_string(dir.path().join("rows.csv")).unwrap();
        assert!(csv.contains("\"x,y\""));
        let bin = std::fs::read(dir.path().join("u.bin")).unwrap();
        assert_eq!(bin.len(), 32);
        assert_eq!(f64::from_le_bytes(bin[8..16].try_into().unwrap()), -2.0);
    }
}
