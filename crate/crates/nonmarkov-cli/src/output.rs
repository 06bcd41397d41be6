//! Files written by every command: CSV tables, matrix dumps and the
//! manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use nonmarkov::io::{fmt17, write_matrix_csv};
use nonmarkov::linalg::CMat;

use crate::config::{Config, SCHEMA_VERSION};

/// SHA-256 of the canonical serialization, so formatting and key order of
/// the input file do not matter.
pub fn config_hash(cfg: &Config) -> String {
    let canonical = serde_json::to_vec(cfg).expect("config serializes");
    let digest = Sha256::digest(&canonical);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn num(x: f64) -> String {
    fmt17(x)
}

pub fn opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

/// A CSV file with a fixed header.
pub struct Table {
    w: BufWriter<File>,
    columns: usize,
}

impl Table {
    pub fn create(path: &Path, header: &[String]) -> std::io::Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{}", header.join(","))?;
        Ok(Self { w, columns: header.len() })
    }

    pub fn row(&mut self, fields: &[String]) -> std::io::Result<()> {
        debug_assert_eq!(fields.len(), self.columns);
        writeln!(self.w, "{}", fields.join(","))
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.w.flush()
    }
}

pub fn write_matrix(path: &Path, m: &CMat) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix_csv(&mut w, m)?;
    w.flush()
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema_version: u32,
    pub command: &'a str,
    pub config_sha256: String,
    pub status: &'a str,
    pub tolerances: &'a crate::config::Tolerances,
    pub outputs: Vec<String>,
    pub invariants: Value,
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'a str, cfg: &'a Config, status: &'a str) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            schema_version: SCHEMA_VERSION,
            command,
            config_sha256: config_hash(cfg),
            status,
            tolerances: &cfg.tolerances,
            outputs: Vec::new(),
            invariants: Value::Null,
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(dir.join("manifest.json"), text)
    }
}

/// Reads back the config hash of an earlier run in `dir`, if any.
pub fn previous_hash(dir: &Path) -> Option<String> {
    let text = std::fs::read_to_string(dir.join("manifest.json")).ok()?;
    let v: Value = serde_json::from_str(&text).ok()?;
    v.get("config_sha256")?.as_str().map(str::to_owned)
}

pub fn file_names(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect()
}
