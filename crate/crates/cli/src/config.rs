//! JSON run configuration.
//!
//! A config file is one JSON object with a `command` discriminator, an
//! optional `schema_version` and the fields of that command. A run manifest
//! is accepted in place of a config file; its resolved `config` is used.
//! Relative paths inside a file are taken relative to the file's directory.

use std::path::{Path, PathBuf};

use emcl::emcl::{EmclConfig, Kernel};
use emcl::synthetic::SyntheticSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::embedding::Encoding;
use crate::error::{CliError, Result};
use crate::fsio;

pub const SCHEMA_VERSION: u64 = 1;

/// EM parameters as they appear in a config file; omitted values fall back
/// to the command's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmclSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Kernel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl EmclSection {
    /// `self` layered over `base`.
    pub fn resolve(&self, base: EmclConfig) -> EmclConfig {
        EmclConfig {
            k: self.k.unwrap_or(base.k),
            iters: self.iters.unwrap_or(base.iters),
            sigma: self.sigma.unwrap_or(base.sigma),
            alpha: self.alpha.unwrap_or(base.alpha),
            beta: self.beta.unwrap_or(base.beta),
            kernel: self.kernel.unwrap_or(base.kernel),
            seed: self.seed.unwrap_or(base.seed),
            epsilon: self.epsilon.unwrap_or(base.epsilon),
        }
    }

    /// `other`'s values win where present.
    pub fn overlay(&self, other: &EmclSection) -> EmclSection {
        EmclSection {
            k: other.k.or(self.k),
            iters: other.iters.or(self.iters),
            sigma: other.sigma.or(self.sigma),
            alpha: other.alpha.or(self.alpha),
            beta: other.beta.or(self.beta),
            kernel: other.kernel.or(self.kernel),
            seed: other.seed.or(self.seed),
            epsilon: other.epsilon.or(self.epsilon),
        }
    }

    pub fn from_config(c: &EmclConfig) -> Self {
        Self {
            k: Some(c.k),
            iters: Some(c.iters),
            sigma: Some(c.sigma),
            alpha: Some(c.alpha),
            beta: Some(c.beta),
            kernel: Some(c.kernel),
            seed: Some(c.seed),
            epsilon: Some(c.epsilon),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunEmclConfig {
    #[serde(default)]
    pub emcl: EmclSection,
    /// A pre-stacked batch; the first `video_rows` rows are videos.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub videos: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texts: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<PathBuf>,
    #[serde(default)]
    pub frozen: bool,
    #[serde(default)]
    pub encoding: Encoding,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default)]
    pub synthetic: SyntheticSpec,
    #[serde(default)]
    pub emcl: EmclSection,
    /// PCA comparator rank; defaults to the EM `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca_k: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub videos: Option<PathBuf>,
    pub texts: Option<PathBuf>,
    /// Text query i matches video `mapping[i]`; identity when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<PathBuf>,
    #[serde(default)]
    pub inverted_softmax: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inv_temperature: Option<f64>,
    /// Contrastive temperature for the reported loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    /// Also evaluate the EM reconstruction of the stacked batch.
    #[serde(default)]
    pub with_emcl: bool,
    #[serde(default)]
    pub emcl: EmclSection,
    /// Initial-value state for the reconstruction; never updated here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<PathBuf>,
    /// Recall cut-offs shown in the printed table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall_ks: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmCheckConfig {
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn format_err(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads the command section of a config file or manifest.
pub fn load<T: DeserializeOwned>(path: &Path, command: &str) -> Result<T> {
    let text = fsio::read_string(path)?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.line(), e.to_string()))?;
    let mut obj = match value {
        Value::Object(o) => o,
        _ => return Err(format_err(path, "config must be a JSON object")),
    };
    if let Some(Value::Object(inner)) = obj.get("config") {
        obj = inner.clone();
    }
    match obj.remove("command") {
        Some(Value::String(c)) if c == command => {}
        Some(other) => {
            return Err(format_err(
                path,
                format!("config is for command {other}, not `{command}`"),
            ))
        }
        None => return Err(format_err(path, "missing `command`")),
    }
    match obj.remove("schema_version") {
        None => {}
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(format_err(
                path,
                format!("unsupported schema_version {v}; this build reads {SCHEMA_VERSION}"),
            ))
        }
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| format_err(path, e.to_string()))
}

/// Anchors a relative path at `base`.
pub fn rebase(path: &mut Option<PathBuf>, base: &Path) {
    if let Some(p) = path {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
}

/// Absolute form of an input path, failing early if it does not exist.
pub fn require_input(path: &Path, role: &str) -> Result<PathBuf> {
    std::fs::canonicalize(path)
        .map_err(|e| CliError::Config(format!("{role} file {}: {e}", path.display())))
}

/// Echo of a resolved config with its discriminator, as stored in manifests.
pub fn echo<T: Serialize>(command: &str, config: &T) -> Value {
    let mut v = serde_json::to_value(config).expect("config serializes");
    if let Value::Object(o) = &mut v {
        o.insert("command".into(), Value::String(command.into()));
        o.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("c.json");
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), r#"{"command":"gmm-check","data":"x","kk":3}"#);
        let err = load::<GmmCheckConfig>(&p, "gmm-check").unwrap_err();
        assert!(err.to_string().contains("kk"), "{err}");
        let p = write(dir.path(), r#"{"command":"run-emcl","emcl":{"kappa":1}}"#);
        assert!(load::<RunEmclConfig>(&p, "run-emcl").is_err());
    }

    #[test]
    fn wrong_command_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), r#"{"command":"run-emcl"}"#);
        assert!(load::<GmmCheckConfig>(&p, "gmm-check").is_err());
        let p = write(dir.path(), r#"{"command":"gmm-check","schema_version":2}"#);
        assert!(load::<GmmCheckConfig>(&p, "gmm-check").is_err());
    }

    #[test]
    fn json_syntax_error_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "{\n\"command\": \n}");
        let err = load::<GmmCheckConfig>(&p, "gmm-check").unwrap_err();
        assert!(matches!(err, CliError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn manifest_config_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            r#"{"tool":"emcl","config":{"command":"gmm-check","schema_version":1,"k":4}}"#,
        );
        let c: GmmCheckConfig = load(&p, "gmm-check").unwrap();
        assert_eq!(c.k, Some(4));
    }

    #[test]
    fn defaults_fill_omitted_emcl_values() {
        let c = EmclSection {
            k: Some(5),
            ..Default::default()
        }
        .resolve(EmclConfig::default());
        assert_eq!((c.k, c.iters, c.sigma, c.alpha), (5, 9, 1.0, 0.9));
        let d = EmclSection::default().resolve(EmclConfig::default());
        assert_eq!(d, EmclConfig::default());
    }
}
