//! One module per subcommand. Each resolves its config (file, then flags),
//! validates every input path, computes, then writes outputs atomically
//! together with a manifest.

mod eval;
mod gmm;
mod run_emcl;
mod synth;

use std::path::{Path, PathBuf};

use emcl::emcl::{EmclConfig, FeatureMatrix, InitialState};
use serde::de::DeserializeOwned;

use crate::cli::{Command, Common};
use crate::config;
use crate::embedding;
use crate::error::{CliError, Result};
use crate::fsio;
use crate::manifest::Recorder;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::RunEmcl(a) => run_emcl::run(a),
        Command::SynthExperiment(a) => synth::run(a),
        Command::EvalRetrieval(a) => eval::run(a),
        Command::GmmCheck(a) => gmm::run(a),
    }
}

/// Config from `--config`, or defaults, plus the directory that relative
/// paths in the file are anchored at.
fn load_config<T: DeserializeOwned + Default>(
    common: &Common,
    command: &str,
) -> Result<(T, PathBuf)> {
    match &common.config {
        Some(path) => {
            let cfg = config::load(path, command)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok((cfg, base))
        }
        None => Ok((T::default(), PathBuf::new())),
    }
}

fn required(path: &Option<PathBuf>, role: &str) -> Result<PathBuf> {
    match path {
        Some(p) => config::require_input(p, role),
        None => Err(CliError::Config(format!("no {role} file given"))),
    }
}

fn canonical(path: &mut Option<PathBuf>, role: &str) -> Result<()> {
    if let Some(p) = path {
        *p = config::require_input(p, role)?;
    }
    Ok(())
}

fn load_features(rec: &mut Recorder, role: &str, path: &Path) -> Result<FeatureMatrix> {
    let bytes = fsio::read(path)?;
    rec.input(role, path, &bytes);
    let m = embedding::decode(&bytes, path)?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(CliError::Shape(format!(
            "{}: {role} matrix is empty",
            path.display()
        )));
    }
    Ok(FeatureMatrix::new(m)?)
}

fn load_state(rec: &mut Recorder, path: &Path) -> Result<InitialState> {
    let bytes = fsio::read(path)?;
    rec.input("state", path, &bytes);
    let state: InitialState = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::parse(path, e.line(), e.to_string()))?;
    state.validate()?;
    Ok(state)
}

fn read_state_alpha(path: &Path) -> Result<f64> {
    let state: InitialState = serde_json::from_slice(&fsio::read(path)?)
        .map_err(|e| CliError::parse(path, e.line(), e.to_string()))?;
    Ok(state.alpha)
}

/// Initial state for a batch of `rows` samples: from a file when given
/// (with the resolved momentum), else a seeded cold start.
fn initial_state(
    rec: &mut Recorder,
    path: Option<&Path>,
    cfg: &EmclConfig,
    rows: usize,
    frozen: bool,
) -> Result<InitialState> {
    let mut state = match path {
        Some(p) => {
            let mut s = load_state(rec, p)?;
            if s.k() != cfg.k {
                return Err(CliError::Shape(format!(
                    "state {} has {} subspaces but k = {}",
                    p.display(),
                    s.k(),
                    cfg.k
                )));
            }
            s.alpha = cfg.alpha;
            s
        }
        None => InitialState::cold_start(cfg.k, rows, cfg.alpha, cfg.seed)?,
    };
    if frozen {
        state = state.frozen();
    }
    Ok(state)
}

/// Plain decimal when readable, scientific otherwise; both round-trip.
fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Config(format!("csv encoding: {e}"));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Config(format!("csv encoding: {e}")))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}
