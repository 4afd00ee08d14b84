//! CSV datasets, checksums and run manifests.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which parses back
//! to the same `f64`. Missing values are empty fields.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Round-trip exact rendering of a float.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// A header row and data rows of equal width.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    /// CSV text with LF line endings.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io_err = |e: csv::Error| Error::NonFinite(format!("csv encoding: {e}"));
        w.write_record(&self.header).map_err(io_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io_err)?;
        }
        w.into_inner()
            .map_err(|e| Error::NonFinite(format!("csv encoding: {e}")))
    }

    /// Column `name` parsed as floats; empty fields become `None`.
    pub fn float_column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[k] {
                    Cell::Float(v) => Some(*v),
                    Cell::Int(v) => Some(*v as f64),
                    Cell::Text(s) => s.parse().ok(),
                    Cell::Empty => None,
                })
                .collect(),
        )
    }
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the table and returns its checksum.
pub fn write_dataset(table: &Table, path: &Path) -> Result<String> {
    let bytes = table.to_csv()?;
    write_bytes(path, &bytes)
}

/// Writes raw bytes, creating parent directories, and returns their checksum.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(bytes))
}

/// Reads a dataset back. Every non-empty field is returned as text.
pub fn read_dataset(path: &Path) -> Result<Table> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().from_reader(bytes.as_slice());
    let parse_err = |e: csv::Error| Error::config(path.display().to_string(), e.to_string());
    let header = r
        .headers()
        .map_err(parse_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for record in r.records() {
        let record = record.map_err(parse_err)?;
        table.rows.push(
            record
                .iter()
                .map(|f| {
                    if f.is_empty() {
                        Cell::Empty
                    } else {
                        Cell::Text(f.to_string())
                    }
                })
                .collect(),
        );
    }
    Ok(table)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// What a run wrote and how it was configured.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub started_unix_s: f64,
    pub wall_clock_s: f64,
    pub outputs: Vec<OutputFile>,
}

/// Collects the files written by one CLI run.
pub struct OutputDir {
    root: PathBuf,
    outputs: Vec<OutputFile>,
}

impl OutputDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            outputs: Vec::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<PathBuf> {
        self.write(name, &table.to_csv()?)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        let sha256 = write_bytes(&path, bytes)?;
        self.outputs.push(OutputFile {
            path: name.to_string(),
            sha256,
            bytes: bytes.len(),
        });
        Ok(path)
    }

    pub fn outputs(&self) -> &[OutputFile] {
        &self.outputs
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(
        self,
        command: &str,
        config_digest: String,
        seed: u64,
        started: SystemTime,
    ) -> Result<PathBuf> {
        let manifest = RunManifest {
            artifact: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_digest,
            seed,
            started_unix_s: started
                .duration_since(UNIX_EPOCH)
                .map_or(0.0, |d| d.as_secs_f64()),
            wall_clock_s: started.elapsed().map_or(0.0, |d| d.as_secs_f64()),
            outputs: self.outputs,
        };
        let json = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| Error::NonFinite(format!("manifest encoding: {e}")))?;
        let path = self.root.join("manifest.json");
        write_bytes(&path, &json)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new(["x", "y"]);
        assert_eq!(t.to_csv().unwrap(), b"x,y\n");
    }

    #[test]
    fn identical_inputs_identical_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(["a"]);
        t.push(vec![Cell::Float(0.1)]);
        let c1 = write_dataset(&t, &dir.path().join("one.csv")).unwrap();
        let c2 = write_dataset(&t, &dir.path().join("two.csv")).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(c1.len(), 64);
    }

    #[test]
    fn missing_directory_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"x").unwrap();
        let err = write_dataset(&Table::new(["a"]), &blocker.join("sub.csv")).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    proptest! {
        #[test]
        fn floats_round_trip_bit_exactly(values in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..40)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("t.csv");
            let mut t = Table::new(["i", "v"]);
            for (i, v) in values.iter().enumerate() {
                t.push(vec![i.into(), (*v).into()]);
            }
            write_dataset(&t, &path).unwrap();
            let back = read_dataset(&path).unwrap();
            let col = back.float_column("v").unwrap();
            for (a, b) in values.iter().zip(col) {
                prop_assert_eq!(a.to_bits(), b.unwrap().to_bits());
            }
        }
    }
}
