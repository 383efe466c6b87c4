//! Tabular and JSON artifacts. Floats are written as shortest round-trip decimals; JSON objects
//! are key-sorted.

use anyhow::Result;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    Empty,
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::F(x) => Some(*x),
            Cell::I(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::S(s) => Some(s),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::I(i as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::S(s.into())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::S(s)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::S(if b { "true" } else { "false" }.into())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map(Cell::F).unwrap_or(Cell::Empty)
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        ryu::Buffer::new().format_finite(x).to_string()
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// One CSV artifact with a single header row.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Column by header name as floats (non-numeric cells become NaN).
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.index(name)?;
        Some(self.rows.iter().map(|r| r[j].as_f64().unwrap_or(f64::NAN)).collect())
    }
}

/// Pretty, key-sorted JSON with a trailing newline.
pub fn json_bytes(v: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("values serialize");
    out.push(b'\n');
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn csv_has_one_header_row() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![1.5.into(), Cell::Empty]);
        t.push(vec![Cell::I(3), "x,y".into()]);
        assert_eq!(String::from_utf8(t.to_csv().unwrap()).unwrap(), "a,b\n1.5,\n3,\"x,y\"\n");
    }

    #[test]
    fn json_keys_are_sorted() {
        let v = serde_json::json!({"b": 1, "a": {"d": 2, "c": 3}});
        let s = String::from_utf8(json_bytes(&v)).unwrap();
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.find("\"c\"").unwrap() < s.find("\"d\"").unwrap());
    }
}
