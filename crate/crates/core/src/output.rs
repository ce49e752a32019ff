//! CSV formatting, run manifests and all-or-nothing file output.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text from equally long numeric columns.
pub fn csv_columns(header: &[&str], columns: &[&[f64]]) -> Result<String> {
    if header.len() != columns.len() {
        return Err(Error::InvalidArgument("header and column count differ".into()));
    }
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::InvalidArgument("columns differ in length".into()));
    }
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..rows {
        let line: Vec<String> = columns.iter().map(|c| fmt_num(c[i])).collect();
        out += &line.join(",");
        out.push('\n');
    }
    Ok(out)
}

/// CSV text from preformatted rows.
pub fn csv_rows(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out += &row.join(",");
        out.push('\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Everything needed to rerun and audit one command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub wall_time_seconds: f64,
    pub stages: Vec<StageTiming>,
    pub counters: BTreeMap<String, u64>,
    pub summary: BTreeMap<String, serde_json::Value>,
    pub files: Vec<FileDigest>,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            tool: "superatom".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            wall_time_seconds: 0.0,
            stages: Vec::new(),
            counters: BTreeMap::new(),
            summary: BTreeMap::new(),
            files: Vec::new(),
            notes: Vec::new(),
        }
    }
}

/// Files staged in memory and written together.
///
/// Nothing touches the disk until [`OutputSet::commit`]; each file goes to a
/// temporary name and is renamed into place, and the manifest is written
/// last, after every digest is known.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.push((name.into(), contents.into()));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn digests(&self) -> Vec<FileDigest> {
        self.files
            .iter()
            .map(|(name, bytes)| FileDigest { name: name.clone(), bytes: bytes.len(), sha256: sha256_hex(bytes) })
            .collect()
    }

    /// Writes all files plus `manifest.json` into `dir`; returns the paths.
    pub fn commit(self, dir: &Path, mut manifest: RunManifest) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        manifest.files = self.digests();
        let manifest_json = serde_json::to_vec_pretty(&manifest).map_err(std::io::Error::other)?;
        let mut staged = Vec::with_capacity(self.files.len() + 1);
        let result = (|| {
            for (name, bytes) in self.files.iter().map(|(n, b)| (n.as_str(), b.as_slice())).chain([("manifest.json", manifest_json.as_slice())]) {
                let tmp = dir.join(format!(".{name}.partial"));
                let mut f = fs::File::create(&tmp)?;
                f.write_all(bytes)?;
                f.sync_all()?;
                staged.push((tmp, dir.join(name)));
            }
            let mut written = Vec::with_capacity(staged.len());
            for (tmp, dest) in &staged {
                fs::rename(tmp, dest)?;
                written.push(dest.clone());
            }
            Ok(written)
        })();
        if result.is_err() {
            for (tmp, _) in &staged {
                let _ = fs::remove_file(tmp);
            }
        }
        result
    }
}
