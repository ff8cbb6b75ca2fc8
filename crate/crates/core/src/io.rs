//! Dataset output: fixed-precision CSV tables and JSON run metadata.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Crate version written into every metadata file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Format a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table held in memory until written.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_floats(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&x| fmt_f64(x)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }
}

/// SHA-256 of the canonical JSON form of `config`, hex encoded.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Metadata written next to every dataset.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub subcommand: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_time_s: f64,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

impl Metadata {
    pub fn new<T: Serialize>(subcommand: &str, config: &T, seed: Option<u64>) -> Result<Self> {
        Ok(Self {
            subcommand: subcommand.to_string(),
            config_hash: config_hash(config)?,
            config: serde_json::to_value(config)?,
            seed,
            version: VERSION.to_string(),
            wall_time_s: 0.0,
            files: Vec::new(),
            extra: serde_json::Value::Null,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        fs::write(path, s)?;
        Ok(())
    }
}

/// Writes tables into one directory and records them for the metadata.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<PathBuf> {
        let file = format!("{name}.csv");
        let path = self.root.join(&file);
        table.write(&path)?;
        self.written.push(file);
        Ok(path)
    }

    /// Write `metadata.json`, listing every table written so far.
    pub fn finish(self, mut meta: Metadata) -> Result<PathBuf> {
        meta.files = self.written;
        let path = self.root.join("metadata.json");
        meta.write(&path)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        let x = std::f64::consts::PI;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_uses_lf_and_header() {
        let mut t = Table::new(["a", "b"]);
        t.push_floats(&[1.0, 0.5]);
        let s = String::from_utf8(t.to_bytes().unwrap()).unwrap();
        assert_eq!(s, "a,b\n1.0000000000000000e0,5.0000000000000000e-1\n");
    }

    #[test]
    fn hash_is_stable() {
        let a = config_hash(&serde_json::json!({"x": 1, "y": [1.5]})).unwrap();
        let b = config_hash(&serde_json::json!({"x": 1, "y": [1.5]})).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
        assert_ne!(a, config_hash(&serde_json::json!({"x": 2})).unwrap());
    }

    #[test]
    fn output_dir_records_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::new(dir.path().join("fig")).unwrap();
        out.write_table("panel", &Table::new(["t"])).unwrap();
        let meta = Metadata::new("figure", &serde_json::json!({}), Some(3)).unwrap();
        let path = out.finish(meta).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(v["files"][0], "panel.csv");
        assert_eq!(v["seed"], 3);
        assert!(dir.path().join("fig/panel.csv").exists());
    }
}
