//! Tables, plot data and the machine-readable run report.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, OutputFormat};

pub const REPORT_FILE: &str = "report.json";
/// Wall-clock timing lives apart from the report so reports stay byte-identical.
pub const RUNTIME_FILE: &str = "runtime.json";
pub const RNG_NAME: &str = "ChaCha8";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

impl Column {
    pub fn new(name: &str, unit: &str) -> Self {
        Self { name: name.to_string(), unit: unit.to_string() }
    }

    /// `name [unit]`, or the bare name when dimensionless.
    pub fn header(&self) -> String {
        if self.unit.is_empty() {
            self.name.clone()
        } else {
            format!("{} [{}]", self.name, self.unit)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Missing,
}

impl Cell {
    /// Full-precision text for data files.
    pub fn raw(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => x.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    /// Three-decimal text for terminal display.
    pub fn display(&self) -> String {
        match self {
            Cell::Float(x) => format!("{x:.3}"),
            Cell::Missing => "-".into(),
            other => other.raw(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Cell::Int(i) => json!(i),
            Cell::Float(x) if x.is_finite() => json!(x),
            Cell::Text(s) => json!(s),
            _ => Value::Null,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Float(x) => Some(*x),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|(n, u)| Column::new(n, u)).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| &r[k]).collect())
    }

    /// Columns holding floating-point values, which get a rounded companion.
    fn float_columns(&self) -> Vec<bool> {
        (0..self.columns.len()).map(|k| self.rows.iter().any(|r| matches!(r[k], Cell::Float(_)))).collect()
    }

    /// Data columns followed, for floats, by `<name>_display` at three places.
    fn expanded_columns(&self) -> Vec<Column> {
        let mut out = Vec::new();
        for (c, is_float) in self.columns.iter().zip(self.float_columns()) {
            out.push(c.clone());
            if is_float {
                out.push(Column::new(&format!("{}_display", c.name), &c.unit));
            }
        }
        out
    }

    fn expanded_row<T>(&self, row: &[Cell], raw: impl Fn(&Cell) -> T, display: impl Fn(String) -> T) -> Vec<T> {
        let mut out = Vec::new();
        for (cell, is_float) in row.iter().zip(self.float_columns()) {
            out.push(raw(cell));
            if is_float {
                out.push(display(match cell {
                    Cell::Missing => String::new(),
                    c => c.display(),
                }));
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let columns = self.expanded_columns();
        let header: Vec<Value> = columns.iter().map(|c| json!({"name": c.name, "unit": c.unit})).collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let values = self.expanded_row(r, Cell::to_json, Value::String);
                Value::Object(columns.iter().map(|c| c.name.clone()).zip(values).collect::<Map<_, _>>())
            })
            .collect();
        json!({"columns": header, "rows": rows})
    }

    pub fn to_csv(&self) -> io::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.expanded_columns().iter().map(Column::header))?;
        for row in &self.rows {
            w.write_record(self.expanded_row(row, Cell::raw, |s| s))?;
        }
        let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8 input"))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = self.columns.iter().map(Column::header).collect::<Vec<_>>().join("\t");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(Cell::raw).collect::<Vec<_>>().join("\t"));
            out.push('\n');
        }
        out
    }

    /// Aligned three-decimal rendering for the terminal.
    pub fn render(&self) -> String {
        let cells: Vec<Vec<String>> = std::iter::once(self.columns.iter().map(Column::header).collect())
            .chain(self.rows.iter().map(|r| r.iter().map(Cell::display).collect()))
            .collect();
        let widths: Vec<usize> =
            (0..self.columns.len()).map(|k| cells.iter().map(|r| r[k].chars().count()).max().unwrap_or(0)).collect();
        let mut out = format!("{}\n", self.name);
        for row in &cells {
            let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

/// Everything a scenario produces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outputs {
    pub tables: Vec<Table>,
    pub plots: Vec<Table>,
}

impl Outputs {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

pub fn report_json(config: &ExperimentConfig, outputs: &Outputs) -> Value {
    let mut tables = Map::new();
    for t in &outputs.tables {
        tables.insert(t.name.clone(), t.to_json());
    }
    json!({
        "scenario": config.scenario.name(),
        "seed": config.seed,
        "config_sha256": config.hash(),
        "config": config.to_toml(),
        "tables": tables,
        "plots": outputs.plots.iter().map(|p| format!("plot_{}.tsv", p.name)).collect::<Vec<_>>(),
        "metadata": {
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "rng": RNG_NAME,
            "runtime_file": RUNTIME_FILE,
        },
    })
}

/// Writes tables, plot data and `report.json`; returns the written paths.
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, outputs: &Outputs) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> io::Result<()> {
        let path = dir.join(name);
        fs::write(&path, text)?;
        written.push(path);
        Ok(())
    };
    for t in &outputs.tables {
        match config.format {
            OutputFormat::Csv => put(format!("{}.csv", t.name), t.to_csv()?)?,
            OutputFormat::Json => put(
                format!("{}.json", t.name),
                serde_json::to_string_pretty(&t.to_json()).map_err(io::Error::other)? + "\n",
            )?,
        }
    }
    for p in &outputs.plots {
        put(format!("plot_{}.tsv", p.name), p.to_tsv())?;
    }
    let report = serde_json::to_string_pretty(&report_json(config, outputs)).map_err(io::Error::other)?;
    put(REPORT_FILE.to_string(), report + "\n")?;
    Ok(written)
}

/// Records how long the scenario took, next to the report.
pub fn write_runtime(dir: &Path, config: &ExperimentConfig, elapsed_s: f64) -> io::Result<PathBuf> {
    let path = dir.join(RUNTIME_FILE);
    let value = json!({
        "scenario": config.scenario.name(),
        "config_sha256": config.hash(),
        "elapsed_s": elapsed_s,
    });
    fs::write(&path, serde_json::to_string_pretty(&value).map_err(io::Error::other)? + "\n")?;
    Ok(path)
}
