//! Output directory where every file is tagged with the config hash.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub version: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    /// Stage name to file name to SHA-256 of the file.
    pub stages: BTreeMap<String, BTreeMap<String, String>>,
}

#[derive(Serialize, Deserialize)]
struct Tagged<T> {
    config_hash: String,
    data: T,
}

pub struct ArtifactDir {
    root: PathBuf,
    hash: String,
    written: BTreeMap<String, String>,
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ArtifactDir {
    pub fn create(root: &Path, hash: &str) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(ArtifactDir { root: root.to_path_buf(), hash: hash.to_string(), written: BTreeMap::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, &bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.insert(name.to_string(), digest(&bytes));
        Ok(())
    }

    /// Writes a CSV whose first line is `# config_hash=<hash>`.
    pub fn write_csv<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> mshedge_core::Result<()>,
    {
        let mut buf = Vec::new();
        writeln!(buf, "# config_hash={}", self.hash).map_err(|e| CliError::io(self.path(name), e))?;
        body(&mut buf)?;
        self.put(name, buf)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<()> {
        let tagged = Tagged { config_hash: self.hash.clone(), data };
        let mut bytes = serde_json::to_vec_pretty(&tagged)
            .map_err(|e| CliError::Json { file: name.to_string(), source: e })?;
        bytes.push(b'\n');
        self.put(name, bytes)
    }

    fn fetch(&self, name: &str) -> Result<Vec<u8>> {
        let path = self.path(name);
        if !path.is_file() {
            return Err(CliError::Dependency(format!(
                "missing {}; run the stage that produces it first",
                path.display()
            )));
        }
        std::fs::read(&path).map_err(|e| CliError::io(&path, e))
    }

    fn mismatch(&self, name: &str, found: &str) -> CliError {
        CliError::Dependency(format!(
            "{name} was produced by config {found}, current config is {}",
            self.hash
        ))
    }

    /// Reads a tagged CSV, rejecting files from another configuration.
    pub fn read_csv(&self, name: &str) -> Result<Vec<u8>> {
        let bytes = self.fetch(name)?;
        let first = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
        let first = String::from_utf8_lossy(first);
        match first.strip_prefix("# config_hash=") {
            Some(h) if h.trim() == self.hash => Ok(bytes),
            Some(h) => Err(self.mismatch(name, h.trim())),
            None => Err(CliError::Dependency(format!("{name} carries no config hash"))),
        }
    }

    pub fn read_json<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        let bytes = self.fetch(name)?;
        let tagged: Tagged<serde_json::Value> =
            serde_json::from_slice(&bytes).map_err(|e| CliError::Json { file: name.to_string(), source: e })?;
        if tagged.config_hash != self.hash {
            return Err(self.mismatch(name, &tagged.config_hash));
        }
        serde_json::from_value(tagged.data).map_err(|e| CliError::Json { file: name.to_string(), source: e })
    }

    /// Records this stage's files in the manifest, resetting it if the config changed.
    pub fn finish_stage(&mut self, stage: &str, template: &Manifest) -> Result<()> {
        let path = self.path(MANIFEST);
        let mut manifest = match std::fs::read(&path) {
            Ok(bytes) => serde_json::from_slice::<Manifest>(&bytes).unwrap_or_default(),
            Err(_) => Manifest::default(),
        };
        if manifest.config_hash != self.hash {
            manifest = template.clone();
        }
        manifest.stages.insert(stage.to_string(), std::mem::take(&mut self.written));
        let mut bytes =
            serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Json { file: MANIFEST.into(), source: e })?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))
    }
}
