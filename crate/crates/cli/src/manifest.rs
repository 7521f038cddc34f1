//! Run manifests: what was run, with which inputs, producing which files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exit::{CliError, CliResult};

pub const MANIFEST_FORMAT: &str = "sdi-manifest/1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileRecord>,
    /// Deterministic artifacts, relative to the output directory.
    pub outputs: Vec<FileRecord>,
    /// Artifacts that hold wall-clock measurements and so differ run to run.
    pub timing_outputs: Vec<String>,
    pub timings_s: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            command: command.into(),
            args,
            config: serde_json::Value::Null,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            timing_outputs: Vec::new(),
            timings_s: BTreeMap::new(),
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.into(), value);
    }

    pub fn timing(&mut self, name: &str, seconds: f64) {
        self.timings_s.insert(name.into(), seconds);
    }

    pub fn input_file(&mut self, path: &Path) -> CliResult<()> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(record(path.display().to_string(), &bytes));
        Ok(())
    }

    /// Records an input that exists only in memory, such as a generated scene.
    pub fn input_bytes(&mut self, name: &str, bytes: &[u8]) {
        self.inputs.push(record(name.into(), bytes));
    }

    /// Map from output path to digest, the part two reproducible runs share.
    pub fn output_digests(&self) -> BTreeMap<&str, &str> {
        self.outputs.iter().map(|r| (r.path.as_str(), r.sha256.as_str())).collect()
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::new(crate::exit::ExitCode::InvalidInput, format!("{}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn record(path: String, bytes: &[u8]) -> FileRecord {
    FileRecord { path, sha256: sha256_hex(bytes), bytes: bytes.len() as u64 }
}

/// Output directory that writes files and keeps the manifest in step.
pub struct OutputDir {
    root: PathBuf,
    manifest: RunManifest,
}

impl OutputDir {
    pub fn create(root: &Path, manifest: RunManifest) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn manifest_mut(&mut self) -> &mut RunManifest {
        &mut self.manifest
    }

    /// Writes a deterministic artifact.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.path(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.manifest.outputs.push(record(name.into(), bytes));
        Ok(path)
    }

    /// Records a file some library call already wrote under the root.
    pub fn adopt(&mut self, name: &str) -> CliResult<()> {
        let path = self.path(name);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        self.manifest.outputs.push(record(name.into(), &bytes));
        Ok(())
    }

    /// Writes an artifact that contains wall-clock timings.
    pub fn write_timing(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.path(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.manifest.timing_outputs.push(name.into());
        Ok(path)
    }

    pub fn finish(self) -> CliResult<RunManifest> {
        let path = self.path(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| CliError::new(crate::exit::ExitCode::Internal, e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(self.manifest)
    }
}
