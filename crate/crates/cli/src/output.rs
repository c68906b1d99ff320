//! Output helpers: 12-significant-digit numbers, CSV with a schema line.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::Value;

use crate::CliError;

pub const SIG_DIGITS: usize = 12;

/// Round to [`SIG_DIGITS`] significant digits.
pub fn sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Round every number in a JSON tree.
pub fn round_json(value: Value) -> Value {
    match value {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => n
            .as_f64()
            .and_then(|x| serde_json::Number::from_f64(sig(x)))
            .map(Value::Number)
            .unwrap_or(Value::Null),
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub fn write_json(path: &Path, value: Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&round_json(value)).expect("JSON values serialize");
    write_file(path, &(text + "\n"))
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

/// CSV document whose first line is `# schema: <tag>`.
pub struct Csv {
    buf: String,
}

pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
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

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(b.to_string())
    }
}

impl Csv {
    pub fn new(schema: &str, header: &[String]) -> Self {
        let mut buf = format!("# schema: {schema}\n");
        buf.push_str(&header.join(","));
        buf.push('\n');
        Self { buf }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        let parts: Vec<String> = cells
            .into_iter()
            .map(|c| match c {
                Cell::Num(x) if x.is_finite() => format!("{}", sig(x)),
                Cell::Num(_) | Cell::Empty => String::new(),
                Cell::Text(s) => s,
            })
            .collect();
        let _ = writeln!(self.buf, "{}", parts.join(","));
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }
}
