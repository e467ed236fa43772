//! Report tables and their CSV/JSON rendering.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Format;
use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Str(s.to_string())
    }
}
impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Str(s)
    }
}
impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}
macro_rules! int_cell {
    ($($t:ty),*) => {$(
        impl From<$t> for Cell {
            fn from(v: $t) -> Self {
                Cell::Int(v as i64)
            }
        }
    )*};
}
int_cell!(u8, u32, u64, usize, i64);

/// Small and huge magnitudes in exponent form, everything else as the
/// shortest round-trip decimal.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e9).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(f) => format_float(*f),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Str(s) => json!(s),
            Cell::Int(i) => json!(i),
            // Non-finite values become null.
            Cell::Float(f) => serde_json::Number::from_f64(*f)
                .map(Value::Number)
                .unwrap_or(Value::Null),
            Cell::Bool(b) => json!(b),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width for table {}",
            self.name
        );
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Runtime(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::text)).map_err(io)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Runtime(e.to_string()))
    }

    fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "columns": self.columns,
            "rows": self.rows.iter().map(|r| r.iter().map(Cell::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metadata {
    pub command: String,
    pub seed: u64,
    pub version: String,
    pub timestamp_unix_s: u64,
}

impl Metadata {
    pub fn now(command: &str, seed: u64) -> Self {
        let timestamp_unix_s = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Metadata {
            command: command.into(),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp_unix_s,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportBundle {
    pub metadata: Metadata,
    pub tables: Vec<Table>,
}

impl ReportBundle {
    pub fn to_json(&self) -> String {
        let v = json!({
            "metadata": self.metadata,
            "tables": self.tables.iter().map(Table::to_json).collect::<Vec<_>>(),
        });
        serde_json::to_string_pretty(&v).expect("report serializes") + "\n"
    }

    /// All tables in one stream, each preceded by a `# name` line.
    pub fn to_csv_stream(&self) -> Result<String, CliError> {
        let mut out = String::new();
        for (i, t) in self.tables.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("# {}\n", t.name));
            out.push_str(&t.to_csv()?);
        }
        Ok(out)
    }

    /// Writes to `dir` (one CSV per table plus `metadata.json`, or a single
    /// `<command>.json`), or to stdout when `dir` is `None`.
    pub fn emit(&self, format: Format, dir: Option<&Path>) -> Result<(), CliError> {
        match dir {
            None => {
                let text = match format {
                    Format::Csv => self.to_csv_stream()?,
                    Format::Json => self.to_json(),
                };
                std::io::stdout().lock().write_all(text.as_bytes())?;
            }
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                match format {
                    Format::Csv => {
                        for t in &self.tables {
                            std::fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv()?)?;
                        }
                        let meta = serde_json::to_string_pretty(&self.metadata)
                            .expect("metadata serializes");
                        std::fs::write(dir.join("metadata.json"), meta + "\n")?;
                    }
                    Format::Json => std::fs::write(
                        dir.join(format!("{}.json", self.metadata.command)),
                        self.to_json(),
                    )?,
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting() {
        assert_eq!(format_float(0.884130), "0.88413");
        assert_eq!(format_float(5.49112e-9), "5.49112e-9");
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(15.336), "15.336");
        assert_eq!(format_float(2e9), "2e9");
        assert_eq!(format_float(-3e-5), "-3e-5");
        assert_eq!(format_float(f64::NAN), "NaN");
    }

    #[test]
    fn csv_quotes_and_decimal_point() {
        let mut t = Table::new("t", &["name", "value_us"]);
        t.push(vec!["a,b".into(), 1234567.5.into()]);
        assert_eq!(t.to_csv().unwrap(), "name,value_us\n\"a,b\",1234567.5\n");
    }

    #[test]
    fn json_nulls_non_finite() {
        let mut t = Table::new("t", &["x"]);
        t.push(vec![f64::NAN.into()]);
        let b = ReportBundle {
            metadata: Metadata::now("x", 1),
            tables: vec![t],
        };
        let v: Value = serde_json::from_str(&b.to_json()).unwrap();
        assert!(v["tables"][0]["rows"][0][0].is_null());
        assert_eq!(v["metadata"]["seed"], 1);
    }
}
