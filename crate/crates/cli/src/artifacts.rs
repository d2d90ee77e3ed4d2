//! Output files: atomic writes and the provenance block every artifact carries.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use swipt_core::scenario::Scenario;
use swipt_core::Result;

pub const TOOL: &str = "swipt";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub scenario: String,
    pub scenario_sha256: String,
}

impl Provenance {
    pub fn new(command: &str, scenario: &Scenario) -> Result<Self> {
        Ok(Self {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            scenario: scenario.name.clone(),
            scenario_sha256: scenario_hash(scenario)?,
        })
    }
}

/// SHA-256 of the effective scenario document. The output directory is left
/// out so the same run written to two places hashes the same.
pub fn scenario_hash(scenario: &Scenario) -> Result<String> {
    let mut s = scenario.clone();
    s.output_dir = None;
    let digest = Sha256::digest(s.to_json()?.as_bytes());
    Ok(format!("{digest:x}"))
}

/// Collects artifacts in memory so a failing command leaves nothing behind.
#[derive(Debug, Default)]
pub struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn new(dir: PathBuf) -> Self {
        Self { dir, files: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Adds `{"provenance": ..., key: payload}` as pretty JSON.
    pub fn add_json<T: Serialize>(&mut self, name: &str, provenance: &Provenance, key: &str, payload: &T) -> Result<()> {
        let mut doc = serde_json::Map::new();
        doc.insert("provenance".into(), serde_json::to_value(provenance)?);
        doc.insert(key.into(), serde_json::to_value(payload)?);
        let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(doc))?;
        text.push('\n');
        self.add(name, text.into_bytes());
        Ok(())
    }

    /// Writes every file; returns their paths.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir)?;
        let mut paths = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            write_atomic(&path, bytes)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// Writes to a temporary file in the target directory, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}
