//! Result tables and their CSV form.

use std::io::Write;

use crate::{Error, Result};

/// Significant digits written for every number.
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as u64)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Empty, Into::into)
    }
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            Value::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Value::Num(v) => format_general(*v, SIGNIFICANT_DIGITS),
            Value::Int(v) => v.to_string(),
            Value::Text(s) => s.clone(),
            Value::Bool(b) => b.to_string(),
            Value::Empty => String::new(),
        }
    }
}

/// `%.{digits}g`-style rendering: fixed notation for moderate exponents,
/// scientific otherwise, trailing zeros removed.
pub fn format_general(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rows in grid order under a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Numeric values of one column, `None` where the cell is not a number.
    pub fn numbers(&self, name: &str) -> Vec<Option<f64>> {
        let i = self.column(name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[i].as_f64()).collect()
    }

    /// Number of rows with a non-empty `error` cell.
    pub fn failures(&self) -> usize {
        match self.column("error") {
            Some(i) => self.rows.iter().filter(|r| r[i] != Value::Empty).count(),
            None => 0,
        }
    }

    /// Writes the table as CSV; `stamp` adds a leading `# generated` line.
    pub fn write_csv<W: Write>(&self, out: W, stamp: Option<&str>) -> Result<()> {
        let io = |e: std::io::Error| Error::config(format!("writing CSV failed: {e}"));
        let mut out = out;
        if let Some(stamp) = stamp {
            writeln!(out, "# generated {stamp}").map_err(io)?;
        }
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::config(format!("writing CSV failed: {e}"));
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Value::render)).map_err(csv_err)?;
        }
        w.flush().map_err(io)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, None).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}
