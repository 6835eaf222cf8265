//! Artifact directory: every CSV starts with a comment line carrying the code
//! version and the config hash, every JSON document carries both as fields.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct Artifacts {
    dir: PathBuf,
    hash: String,
    written: Vec<String>,
}

impl Artifacts {
    /// Creates `dir` and checks that it accepts files.
    pub fn create(dir: &Path, hash: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let probe = dir.join(".vpdirac-probe");
        fs::write(&probe, b"").with_context(|| format!("output directory {} is not writable", dir.display()))?;
        fs::remove_file(&probe).ok();
        Ok(Self { dir: dir.to_path_buf(), hash: hash.to_string(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn header(&self) -> String {
        format!("# vpdirac {VERSION} config {}\n", self.hash)
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes a table produced by `body` under the provenance comment.
    pub fn csv(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = self.header().into_bytes();
        body(&mut buf)?;
        self.put(name, &buf)
    }

    pub fn text(&mut self, name: &str, content: &str) -> Result<()> {
        self.put(name, content.as_bytes())
    }

    pub fn binary(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        self.put(name, bytes)
    }

    /// Writes `fields` with `version` and `config_hash` prepended.
    pub fn json(&mut self, name: &str, fields: Map<String, Value>) -> Result<()> {
        let mut doc = Map::new();
        doc.insert("version".into(), json!(VERSION));
        doc.insert("config_hash".into(), json!(self.hash));
        doc.extend(fields);
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }
}

/// CSV row of floats in shortest round-trip form.
pub fn row(values: &[f64]) -> String {
    values.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}
