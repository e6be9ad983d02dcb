//! Plain-text run artifacts.
//!
//! Every table is tab-separated with a header row of column names, and every
//! number is written in scientific notation with 17 significant digits, so
//! reading a table back reproduces the doubles bit for bit. Each run
//! directory also carries a TOML `manifest` holding the configuration, the
//! configuration hash and summary numbers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{SimError, SimResult};

/// Column-oriented numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Table from equally long columns.
    pub fn from_columns(columns: &[(&str, &[f64])]) -> Self {
        let len = columns.first().map_or(0, |c| c.1.len());
        assert!(columns.iter().all(|c| c.1.len() == len), "columns of unequal length");
        let mut table = Self::new(&columns.iter().map(|c| c.0).collect::<Vec<_>>());
        table.rows = (0..len).map(|i| columns.iter().map(|c| c.1[i]).collect()).collect();
        table
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = self.columns.join("\t");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push('\t');
                }
                write!(out, "{v:.16e}").expect("writing to a string");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty table")?;
        let columns: Vec<String> = header.split('\t').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let row = line
                .split('\t')
                .map(|f| f.parse::<f64>().map_err(|e| format!("line {}: {e}", n + 2)))
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != columns.len() {
                return Err(format!("line {}: {} fields, expected {}", n + 2, row.len(), columns.len()));
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn write(&self, path: &Path) -> SimResult<()> {
        fs::write(path, self.to_tsv()).map_err(|e| SimError::io(path, e))
    }

    pub fn read(path: &Path) -> SimResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::parse(&text).map_err(|message| SimError::Artifact {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Named column, or an artifact error naming the file.
    pub fn require(&self, name: &str, path: &Path) -> SimResult<Vec<f64>> {
        self.column(name).ok_or_else(|| SimError::Artifact {
            path: path.to_path_buf(),
            message: format!("missing column `{name}`"),
        })
    }
}

/// Run description stored next to the tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// `stationary` or `transient`.
    pub kind: String,
    pub engine: String,
    pub config_hash: String,
    pub files: Vec<String>,
    pub summary: BTreeMap<String, f64>,
    pub config: RunConfig,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> SimResult<()> {
        let path = dir.join("manifest");
        let text = toml::to_string(self).expect("manifest always serialises");
        fs::write(&path, text).map_err(|e| SimError::io(&path, e))
    }

    pub fn read(dir: &Path) -> SimResult<Self> {
        let path = dir.join("manifest");
        let text = fs::read_to_string(&path).map_err(|e| SimError::io(&path, e))?;
        toml::from_str(&text).map_err(|e| SimError::Artifact {
            path,
            message: e.to_string(),
        })
    }
}

/// Hex SHA-256 of the configuration together with a label for what is
/// computed from it.
pub fn config_hash(cfg: &RunConfig, label: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(label.as_bytes());
    hasher.update([0u8]);
    hasher.update(cfg.to_toml().as_bytes());
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn create_dir(dir: &Path) -> SimResult<()> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))
}

/// On-disk cache of run directories keyed by configuration hash.
#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn entry(&self, cfg: &RunConfig, label: &str) -> PathBuf {
        self.root.join(config_hash(cfg, label))
    }

    /// Directory of a finished entry, if one exists.
    pub fn lookup(&self, cfg: &RunConfig, label: &str) -> Option<PathBuf> {
        let dir = self.entry(cfg, label);
        dir.join("manifest").is_file().then_some(dir)
    }
}
