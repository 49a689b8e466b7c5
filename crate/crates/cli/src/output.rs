//! Tables written as CSV or JSON lines.
//!
//! CSV output starts with one `#` comment line (tool version, command, config
//! fingerprint, seed), then the header row. JSON output starts with one object
//! carrying the same metadata, followed by one object per row. Floating-point
//! values are written with 17 significant digits; non-finite values become the
//! strings `NaN`, `inf` and `-inf`.

use std::io::{self, Write};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i128),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    pub fn opt(value: Option<f64>) -> Self {
        value.map_or(Self::Empty, Self::Float)
    }

    fn csv_field(&self) -> String {
        match self {
            Self::Float(v) => float_text(*v),
            Self::Int(v) => v.to_string(),
            Self::Text(s) => s.clone(),
            Self::Bool(b) => b.to_string(),
            Self::Empty => String::new(),
        }
    }

    fn json_value(&self) -> String {
        match self {
            Self::Float(v) if v.is_finite() => float_text(*v),
            Self::Float(v) => json_string(&float_text(*v)),
            Self::Int(v) => v.to_string(),
            Self::Text(s) => json_string(s),
            Self::Bool(b) => b.to_string(),
            Self::Empty => "null".into(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Self::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Self::Int(v as i128)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Self::Int(i128::from(v))
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Self::Int(i128::from(v))
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Self::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Self::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Self::Text(v)
    }
}

pub fn float_text(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub command: &'static str,
    pub fingerprint: String,
    pub seed: u64,
}

pub fn write_csv<W: Write>(out: W, meta: &Metadata, table: &Table) -> io::Result<()> {
    let mut out = out;
    writeln!(
        out,
        "# matprod {} command={} fingerprint={} seed={}",
        env!("CARGO_PKG_VERSION"),
        meta.command,
        meta.fingerprint,
        meta.seed
    )?;
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer.write_record(&table.columns)?;
    for row in &table.rows {
        writer.write_record(row.iter().map(Cell::csv_field))?;
    }
    writer.flush()
}

pub fn write_json<W: Write>(mut out: W, meta: &Metadata, table: &Table) -> io::Result<()> {
    writeln!(
        out,
        "{{\"tool\":{},\"version\":{},\"command\":{},\"fingerprint\":{},\"seed\":{}}}",
        json_string("matprod"),
        json_string(env!("CARGO_PKG_VERSION")),
        json_string(meta.command),
        json_string(&meta.fingerprint),
        meta.seed
    )?;
    for row in &table.rows {
        let fields: Vec<String> = table
            .columns
            .iter()
            .zip(row)
            .map(|(name, cell)| format!("{}:{}", json_string(name), cell.json_value()))
            .collect();
        writeln!(out, "{{{}}}", fields.join(","))?;
    }
    out.flush()
}
