//! Result tables, pass/fail checks and run manifests.
//!
//! CSV floats are written with 17 significant digits in scientific
//! notation, so files round-trip to the same `f64` bits and do not depend on
//! locale. JSON uses serde_json's shortest round-trip representation;
//! non-finite values become `null`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::dilation::Witness;
use crate::error::Result;
use crate::experiment::config::{ExperimentConfig, Format};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn json(&self) -> Value {
        match self {
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Bool(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.as_str()),
        }
    }
}

/// `{:.16e}`, with `inf`, `-inf` and `nan` spelled out.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
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
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let mut obj = Map::new();
                    for (k, v) in self.columns.iter().zip(row) {
                        obj.insert(k.to_string(), v.json());
                    }
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

/// One acceptance check: a measured value against its tolerance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl Check {
    /// Passes when `value <= tolerance`; NaN fails.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            bound: Bound::AtMost,
            passed: value <= tolerance,
            witness: None,
        }
    }

    /// Passes when `value >= tolerance`; NaN fails.
    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            bound: Bound::AtLeast,
            passed: value >= tolerance,
            witness: None,
        }
    }

    pub fn with_witness(mut self, witness: &Witness) -> Self {
        self.witness = Some(witness.clone());
        self
    }
}

/// Everything an experiment produces before it is written out.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub table: Table,
    pub checks: Vec<Check>,
    /// Scalar results worth surfacing in the manifest, e.g. fitted slopes.
    pub summary: Map<String, Value>,
    /// Extra CSV files, `(file name, contents)`.
    pub attachments: Vec<(String, String)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    pub fn note_float(&mut self, key: &str, value: f64) {
        self.note(key, Cell::Float(value).json());
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub gauge_z_weight: f64,
    pub wall_time_seconds: f64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub summary: Map<String, Value>,
    pub outputs: Vec<PathBuf>,
}

/// Writes the result table, attachments and manifest into `config.out`.
pub fn write_outputs(
    config: &ExperimentConfig,
    outcome: &Outcome,
    wall_time_seconds: f64,
) -> Result<RunManifest> {
    let dir: &Path = &config.out;
    std::fs::create_dir_all(dir)?;
    let name = config.experiment.name();
    let main = dir.join(format!("{name}.{}", config.format.extension()));
    match config.format {
        Format::Csv => std::fs::write(&main, outcome.table.to_csv())?,
        Format::Json => {
            let mut text = serde_json::to_string_pretty(&outcome.table.to_json())?;
            text.push('\n');
            std::fs::write(&main, text)?
        }
    }
    let mut outputs = vec![main];
    for (file, contents) in &outcome.attachments {
        let path = dir.join(file);
        std::fs::write(&path, contents)?;
        outputs.push(path);
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        gauge_z_weight: crate::heisenberg::GAUGE_Z_WEIGHT,
        wall_time_seconds,
        passed: outcome.passed(),
        checks: outcome.checks.clone(),
        summary: outcome.summary.clone(),
        outputs,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(dir.join(format!("{name}.manifest.json")), text)?;
    Ok(manifest)
}
