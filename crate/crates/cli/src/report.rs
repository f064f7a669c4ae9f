use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::F)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::I(v as i64)
    }
}

impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::I(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl Cell {
    /// Floats use the shortest representation that round-trips, so equal
    /// values always print the same bytes.
    fn render(&self) -> String {
        match self {
            Cell::F(v) => format!("{v:e}"),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => {
        vec![$($crate::report::Cell::from($x)),*]
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width for {:?}", self.header);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(std::io::Error::other(e.to_string()));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).map_err(io)?;
        }
        w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))
    }
}

/// One pass/fail line of an acceptance block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub criterion: Option<u8>,
    pub name: String,
    /// The measured quantity compared against `bound`.
    pub value: f64,
    pub bound: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn new(criterion: Option<u8>, name: impl Into<String>, value: f64, bound: impl Into<String>, pass: bool) -> Self {
        Self {
            criterion,
            name: name.into(),
            value,
            bound: bound.into(),
            pass: pass && !value.is_nan(),
            note: None,
        }
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// `value <= bound`.
    pub fn at_most(criterion: Option<u8>, name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(criterion, name, value, format!("<= {bound}"), value <= bound)
    }

    /// `value < bound`.
    pub fn below(criterion: Option<u8>, name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(criterion, name, value, format!("< {bound}"), value < bound)
    }

    /// `lo <= value <= hi`.
    pub fn within(criterion: Option<u8>, name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self::new(criterion, name, value, format!("in [{lo}, {hi}]"), (lo..=hi).contains(&value))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: Table,
    pub summary: Value,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn new(table: Table) -> Self {
        Self {
            table,
            summary: Value::Object(Map::new()),
            checks: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        if let Value::Object(m) = &mut self.summary {
            m.insert(key.to_string(), v);
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Per-criterion verdicts plus the individual checks.
    pub fn acceptance(&self) -> Value {
        let mut criteria: BTreeMap<String, bool> = BTreeMap::new();
        for c in &self.checks {
            if let Some(k) = c.criterion {
                *criteria.entry(k.to_string()).or_insert(true) &= c.pass;
            }
        }
        json!({
            "pass": self.passed(),
            "criteria": criteria,
            "checks": self.checks,
        })
    }
}
