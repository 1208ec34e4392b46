//! Artifact writing, number formatting and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Round-trip exact: 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Comma-separated table with a fixed header.
#[derive(Debug, Clone)]
pub struct Table {
    columns: usize,
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Table {
            columns: header.len(),
            text,
        }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        assert_eq!(cells.len(), self.columns, "row width differs from header");
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match c {
                Cell::F(x) => self.text.push_str(&fmt_f64(*x)),
                Cell::I(i) => {
                    let _ = write!(self.text, "{i}");
                }
                Cell::S(s) => self.text.push_str(&quote(s)),
                Cell::Empty => {}
            }
        }
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    Empty,
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArtifactRecord {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Digest over `path NUL sha256 LF` lines in path order.
pub fn combined_digest(artifacts: &[ArtifactRecord]) -> String {
    let mut sorted: Vec<&ArtifactRecord> = artifacts.iter().collect();
    sorted.sort_by(|a, b| a.path.cmp(&b.path));
    let mut h = Sha256::new();
    for a in sorted {
        h.update(a.path.as_bytes());
        h.update([0]);
        h.update(a.sha256.as_bytes());
        h.update([b'\n']);
    }
    format!("{:x}", h.finalize())
}

#[derive(Debug, thiserror::Error)]
#[error("{path}: {source}")]
pub struct IoError {
    pub path: PathBuf,
    pub source: io::Error,
}

/// An output directory that remembers what was written into it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    artifacts: Vec<ArtifactRecord>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, IoError> {
        fs::create_dir_all(root).map_err(|source| IoError {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), IoError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| IoError {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        fs::write(&path, bytes).map_err(|source| IoError { path, source })?;
        self.artifacts.retain(|a| a.path != rel);
        self.artifacts.push(ArtifactRecord {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), IoError> {
        let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Record a file that someone else wrote and digested below the root.
    pub fn record(&mut self, a: ArtifactRecord) {
        self.artifacts.retain(|b| b.path != a.path);
        self.artifacts.push(a);
    }

    pub fn artifacts(&self) -> &[ArtifactRecord] {
        &self.artifacts
    }
}

/// One pass/fail assertion of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Informational checks are reported but do not decide the exit status.
    pub gating: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            gating: true,
            value: None,
            threshold: None,
            detail: detail.into(),
        }
    }

    /// Passes when `value <= threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            passed: value <= threshold,
            gating: true,
            value: Some(value),
            threshold: Some(threshold),
            detail: format!("{} <= {}", fmt_f64(value), fmt_f64(threshold)),
        }
    }

    pub fn info(mut self) -> Self {
        self.gating = false;
        self
    }
}

pub fn unix_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub metrics: serde_json::Map<String, serde_json::Value>,
    pub artifacts: Vec<ArtifactRecord>,
    /// Digest over every artifact; manifests themselves are not artifacts.
    pub digest: String,
}

impl RunManifest {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.gating && !c.passed)
    }
}

/// Everything a command produced besides the files themselves.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub metrics: serde_json::Map<String, serde_json::Value>,
    pub error: Option<String>,
}

impl Outcome {
    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn metric(&mut self, key: &str, v: impl Into<serde_json::Value>) {
        self.metrics.insert(key.to_string(), v.into());
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.passed || !c.gating)
    }
}

/// Seal a run: sort artifacts, digest them and write `manifest.json`.
pub fn write_outputs(
    out: &OutputDir,
    command: &str,
    config: serde_json::Value,
    started_unix_ms: u64,
    outcome: Outcome,
) -> Result<RunManifest, IoError> {
    let mut artifacts = out.artifacts().to_vec();
    artifacts.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        config,
        started_unix_ms,
        finished_unix_ms: unix_ms(),
        passed: outcome.passed(),
        error: outcome.error,
        checks: outcome.checks,
        warnings: outcome.warnings,
        metrics: outcome.metrics,
        digest: combined_digest(&artifacts),
        artifacts,
    };
    let path = out.root().join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|source| IoError { path, source })?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(&["t", "name", "n"]);
        t.row(&[Cell::F(0.5), Cell::S("a,b".into()), Cell::I(3)]);
        t.row(&[Cell::F(1.0), Cell::Empty, Cell::I(-1)]);
        let s = String::from_utf8(t.into_bytes()).unwrap();
        assert_eq!(s, "t,name,n\n5.0000000000000000e-1,\"a,b\",3\n1.0000000000000000e0,,-1\n");
    }

    #[test]
    fn empty_run_has_a_valid_digest() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path()).unwrap();
        let m = write_outputs(&out, "noop", serde_json::Value::Null, 0, Outcome::default()).unwrap();
        assert!(m.artifacts.is_empty());
        assert!(m.passed);
        assert_eq!(m.digest, sha256_hex(b""));
        assert_eq!(m.digest.len(), 64);
        let back: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(back["digest"], m.digest);
    }

    #[test]
    fn digest_tracks_content_not_order() {
        let a = |p: &str, d: &[u8]| ArtifactRecord {
            path: p.into(),
            sha256: sha256_hex(d),
            bytes: d.len() as u64,
        };
        let x = combined_digest(&[a("a.csv", b"1"), a("b.csv", b"2")]);
        assert_eq!(x, combined_digest(&[a("b.csv", b"2"), a("a.csv", b"1")]));
        assert_ne!(x, combined_digest(&[a("a.csv", b"1"), a("b.csv", b"3")]));
    }

    #[test]
    fn informational_checks_do_not_gate() {
        let mut o = Outcome::default();
        o.check(Check::at_most("small", 1.0, 2.0));
        o.check(Check::new("exact form", false, "").info());
        assert!(o.passed());
        o.check(Check::at_most("large", 3.0, 2.0));
        assert!(!o.passed());
    }
}
