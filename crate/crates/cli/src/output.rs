//! CSV and JSON emission. Floats are written with 17 significant digits so
//! they read back to the same double.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{CliError, CliResult};

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table with a fixed header.
pub struct Table {
    header: Vec<&'static str>,
    body: String,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            body: String::new(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.header.len());
        let _ = writeln!(self.body, "{}", cells.join(","));
    }

    pub fn floats(&mut self, values: &[f64]) {
        self.row(&values.iter().map(|&x| float(x)).collect::<Vec<_>>());
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_file(path, format!("{}\n{}", self.header.join(","), self.body))
    }
}

pub fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write_file(path, text)
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Creates `dir` and returns it.
pub fn ensure_dir(dir: &Path) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir.to_path_buf())
}

/// JSON number, or null for non-finite values.
pub fn number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 5.389489, f64::MAX, f64::MIN_POSITIVE] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn tables_have_a_header_row() {
        let mut t = Table::new(&["a", "b"]);
        t.floats(&[1.0, 2.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        t.write(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "a,b\n1.0000000000000000e0,2.0000000000000000e0\n");
    }

    #[test]
    fn non_finite_numbers_become_null() {
        assert_eq!(number(f64::NAN), Value::Null);
        assert_eq!(number(1.5), serde_json::json!(1.5));
    }
}
