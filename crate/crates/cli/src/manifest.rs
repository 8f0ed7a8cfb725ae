//! Run manifests: enough to trace every output back to its inputs and to
//! re-run the command (`--config manifest.json`).

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::fsio;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    /// Absolute for inputs, relative to the output directory for outputs.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Half-open row ranges of the stacked batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowRanges {
    pub video: [usize; 2],
    pub text: [usize; 2],
}

impl RowRanges {
    pub fn split(videos: usize, texts: usize) -> Self {
        Self {
            video: [0, videos],
            text: [videos, videos + texts],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<RowRanges>,
    /// Wall-clock milliseconds per stage.
    pub timings_ms: BTreeMap<String, f64>,
}

/// Collects digests and stage timings while a command runs.
pub struct Recorder {
    manifest: Manifest,
    stage: Instant,
}

impl Recorder {
    pub fn new(command: &str, config: Value) -> Self {
        Self {
            manifest: Manifest {
                tool: "emcl".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                config,
                inputs: Vec::new(),
                outputs: Vec::new(),
                rows: None,
                timings_ms: BTreeMap::new(),
            },
            stage: Instant::now(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path, bytes: &[u8]) {
        self.manifest.inputs.push(FileDigest {
            role: role.into(),
            path: path.display().to_string(),
            sha256: fsio::sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }

    /// Atomically writes `bytes` to `dir/name` and records its digest.
    pub fn output(&mut self, dir: &Path, name: &str, role: &str, bytes: &[u8]) -> Result<()> {
        fsio::write_atomic(&dir.join(name), bytes)?;
        self.manifest.outputs.push(FileDigest {
            role: role.into(),
            path: name.into(),
            sha256: fsio::sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn rows(&mut self, rows: RowRanges) {
        self.manifest.rows = Some(rows);
    }

    /// Closes the current stage under `name`.
    pub fn lap(&mut self, name: &str) {
        let ms = self.stage.elapsed().as_secs_f64() * 1e3;
        self.manifest.timings_ms.insert(name.into(), ms);
        self.stage = Instant::now();
    }

    pub fn finish(self, dir: &Path) -> Result<Manifest> {
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        fsio::write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())?;
        Ok(self.manifest)
    }
}
