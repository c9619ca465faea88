//! CSV and JSON writers with atomic file placement.
//!
//! CSV is RFC-4180 style: header row, CRLF line endings, `.` decimal
//! separator. Reals are written with the shortest round-trip representation
//! (`Display` for `f64`), so fixed-seed runs are byte-identical.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Write via a temp file and atomic rename so no output is ever partial.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// Incremental CSV body builder.
pub struct Csv {
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = String::new();
        buf.push_str(&header.join(","));
        buf.push_str("\r\n");
        Csv {
            buf,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, fields: &[CsvField]) {
        debug_assert_eq!(fields.len(), self.columns);
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            match f {
                CsvField::Int(v) => self.buf.push_str(&v.to_string()),
                CsvField::Real(v) => self.buf.push_str(&v.to_string()),
                CsvField::Text(s) => self.buf.push_str(s),
            }
        }
        self.buf.push_str("\r\n");
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

pub enum CsvField<'a> {
    Int(i64),
    Real(f64),
    Text(&'a str),
}

/// Provenance record for one tool invocation; every referenced output file
/// exists on success.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub start_unix_ms: u128,
    pub end_unix_ms: u128,
    pub config: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub pass: bool,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: BTreeMap<String, String>) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            start_unix_ms: now_ms(),
            end_unix_ms: 0,
            config,
            outputs: Vec::new(),
            pass: false,
        }
    }

    pub fn finish(&mut self, pass: bool) {
        self.end_unix_ms = now_ms();
        self.pass = pass;
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(path, json.as_bytes())
    }
}

pub fn now_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_formats_round_trip_reals() {
        let mut csv = Csv::new(&["step", "value", "name"]);
        csv.row(&[CsvField::Int(3), CsvField::Real(0.1), CsvField::Text("ok")]);
        csv.row(&[
            CsvField::Int(-1),
            CsvField::Real(1.0 / 3.0),
            CsvField::Text("x"),
        ]);
        let body = csv.finish();
        let mut lines = body.split("\r\n");
        assert_eq!(lines.next().unwrap(), "step,value,name");
        assert_eq!(lines.next().unwrap(), "3,0.1,ok");
        let third: f64 = lines
            .next()
            .unwrap()
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(third, 1.0 / 3.0);
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = std::env::temp_dir().join(format!("vpfp_out_test_{}", std::process::id()));
        let path = dir.join("nested/file.csv");
        write_atomic(&path, b"a,b\r\n1,2\r\n").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"a,b\r\n1,2\r\n");
        assert!(!path.with_extension("csv.tmp").exists());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
