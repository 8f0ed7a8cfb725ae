//! Expectation-maximization routing of coding bits onto `K` subspaces.
//!
//! A stacked batch `X` (`2B × D`) is re-expressed through bases `λ`
//! (`2B × K`) and responsibilities `Y` (`D × K`):
//!
//! * E-step: `Y = softmax_k(kernel(Xᵀλ))`
//! * M-step: `λ_{:,k} = X Y_{:,k} / Σ_j y_{j,k}`, then unit-normalize columns
//! * reconstruction: `X̃ = λ Yᵀ`, which has rank at most `K`
//!
//! The initial bases are a broadcast of the persistent vector `M`, which is
//! blended with the column means of the final `λ` after each training batch.

mod kernel;
mod state;
mod types;

pub use kernel::Kernel;
pub use state::InitialState;
pub use types::{BasisMatrix, FeatureMatrix, ResponsibilityMatrix};

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, softmax_rows_in_place};

/// Hyper-parameters of the routing loop. Defaults follow the reference
/// setting: `K = 32`, `T = 9`, `σ = 1`, `α = 0.9`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmclConfig {
    pub k: usize,
    pub iters: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kernel: Kernel,
    pub seed: u64,
    pub epsilon: f64,
}

impl Default for EmclConfig {
    fn default() -> Self {
        Self {
            k: 32,
            iters: 9,
            sigma: 1.0,
            alpha: 0.9,
            beta: 1.0,
            kernel: Kernel::GaussianAttention,
            seed: 0,
            epsilon: 1e-8,
        }
    }
}

impl EmclConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(Error::InvalidArgument(
                "iteration count T must be >= 1".into(),
            ));
        }
        self.validate_allow_zero_iters()
    }

    pub(crate) fn validate_allow_zero_iters(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument(
                "subspace count K must be >= 1".into(),
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument("epsilon must be >= 0".into()));
        }
        Ok(())
    }
}

/// Kernel logit between one column of `X` and one basis column.
pub fn kernel_eval(x_col: &[f64], lambda_col: &[f64], config: &EmclConfig) -> Result<f64> {
    if x_col.is_empty() {
        return Err(Error::Empty("kernel inputs"));
    }
    if x_col.len() != lambda_col.len() {
        return Err(Error::shape("kernel_eval", x_col.len(), lambda_col.len()));
    }
    if config.sigma.is_nan() || config.sigma <= 0.0 {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    if x_col.iter().chain(lambda_col).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kernel input".into()));
    }
    let dot: f64 = x_col.iter().zip(lambda_col).map(|(a, b)| a * b).sum();
    let logit = config.kernel.logit(dot, config.sigma);
    if !logit.is_finite() {
        return Err(Error::NonFinite("kernel logit".into()));
    }
    Ok(logit)
}

/// E-step: responsibilities of every coding bit for every subspace.
pub fn e_step(
    x: &FeatureMatrix,
    bases: &BasisMatrix,
    config: &EmclConfig,
) -> Result<ResponsibilityMatrix> {
    if bases.rows() != x.rows() {
        return Err(Error::shape("e_step basis rows", x.rows(), bases.rows()));
    }
    if bases.k() != config.k {
        return Err(Error::shape("e_step basis columns", config.k, bases.k()));
    }
    let mut logits = x.as_matrix().tr_mul(bases.as_matrix());
    let (kernel, sigma) = (config.kernel, config.sigma);
    logits.apply(|v| *v = kernel.logit(*v, sigma));
    if !all_finite(&logits) {
        return Err(Error::NonFinite("e_step logits".into()));
    }
    softmax_rows_in_place(&mut logits);
    Ok(ResponsibilityMatrix::from_softmax(logits))
}

/// M-step: responsibility-weighted means of the coding bits.
///
/// Subspaces whose mass `Σ_j y_{j,k}` falls below `config.epsilon` are
/// reported in [`BasisMatrix::dead_subspaces`].
pub fn m_step(
    x: &FeatureMatrix,
    y: &ResponsibilityMatrix,
    config: &EmclConfig,
) -> Result<BasisMatrix> {
    if y.rows() != x.cols() {
        return Err(Error::shape(
            "m_step responsibility rows",
            x.cols(),
            y.rows(),
        ));
    }
    let mut bases = x.as_matrix() * y.as_matrix();
    let mut dead = Vec::new();
    for (k, mut col) in bases.column_iter_mut().enumerate() {
        let mass = y.as_matrix().column(k).sum();
        if mass < config.epsilon || mass == 0.0 {
            dead.push(k);
        }
        let denom = mass + config.epsilon;
        if denom > 0.0 {
            col /= denom;
        } else {
            col.fill(0.0);
        }
    }
    if !dead.is_empty() {
        warn!("dead subspaces after M-step: {dead:?}");
    }
    BasisMatrix::with_dead(bases, dead)
}

/// Unit-normalizes every basis column; zero columns stay zero and are
/// flagged dead.
pub fn normalize_bases(bases: &BasisMatrix) -> BasisMatrix {
    let mut dead = bases.dead_subspaces().to_vec();
    let mut data = bases.as_matrix().clone();
    for (k, mut col) in data.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        } else if !dead.contains(&k) {
            dead.push(k);
        }
    }
    dead.sort_unstable();
    BasisMatrix::with_dead(data, dead).expect("normalizing finite bases stays finite")
}

/// Broadcasts `M` to every sample row.
pub fn init_bases(state: &InitialState, num_rows: usize) -> Result<BasisMatrix> {
    if num_rows == 0 {
        return Err(Error::InvalidArgument("num_rows must be >= 1".into()));
    }
    state.validate()?;
    let m = &state.m;
    BasisMatrix::new(DMatrix::from_fn(num_rows, m.len(), |_, k| m[k]))
}

/// `X̃ = λ Yᵀ`.
pub fn reconstruct(bases: &BasisMatrix, y: &ResponsibilityMatrix) -> Result<FeatureMatrix> {
    if bases.k() != y.k() {
        return Err(Error::shape("reconstruct", bases.k(), y.k()));
    }
    FeatureMatrix::new(bases.as_matrix() * y.as_matrix().transpose())
}

/// `β · reconstructed + original`.
pub fn apply_residual(
    original: &FeatureMatrix,
    reconstructed: &FeatureMatrix,
    beta: f64,
) -> Result<FeatureMatrix> {
    let (a, b) = (original.as_matrix(), reconstructed.as_matrix());
    if a.shape() != b.shape() {
        return Err(Error::shape(
            "apply_residual",
            format!("{:?}", a.shape()),
            format!("{:?}", b.shape()),
        ));
    }
    FeatureMatrix::new(b * beta + a)
}

/// Momentum update `m_k ← α m_k + (1 − α) mean_i λ_{i,k}`.
pub fn update_initial_state(state: &InitialState, bases: &BasisMatrix) -> Result<InitialState> {
    if state.frozen {
        return Err(Error::FrozenState);
    }
    if bases.k() != state.k() {
        return Err(Error::shape("update_initial_state", state.k(), bases.k()));
    }
    let alpha = state.alpha;
    let m = state
        .m
        .iter()
        .zip(bases.column_means())
        .map(|(&m, mean)| alpha * m + (1.0 - alpha) * mean)
        .collect();
    InitialState::new(m, alpha, false)
}

/// Snapshot handed to an observer after every routing iteration.
#[derive(Debug)]
pub struct IterationView<'a> {
    /// 1-based iteration index.
    pub iteration: usize,
    pub bases: &'a BasisMatrix,
    pub responsibilities: &'a ResponsibilityMatrix,
    /// `‖λ^t − λ^{t−1}‖_F`, with `λ^0` the initialization.
    pub lambda_change: f64,
}

#[derive(Debug, Clone)]
pub struct EmclOutput {
    pub reconstructed: FeatureMatrix,
    pub bases: BasisMatrix,
    pub responsibilities: ResponsibilityMatrix,
    pub state: InitialState,
    pub lambda_changes: Vec<f64>,
}

/// Runs `T` routing iterations and reconstructs the batch.
pub fn emcl_iterate(
    x: &FeatureMatrix,
    state: &InitialState,
    config: &EmclConfig,
) -> Result<EmclOutput> {
    emcl_iterate_observed(x, state, config, |_| {})
}

/// [`emcl_iterate`] with a callback invoked after each iteration.
pub fn emcl_iterate_observed<F>(
    x: &FeatureMatrix,
    state: &InitialState,
    config: &EmclConfig,
    mut observe: F,
) -> Result<EmclOutput>
where
    F: FnMut(IterationView<'_>),
{
    config.validate()?;
    if state.k() != config.k {
        return Err(Error::shape("initial state length", config.k, state.k()));
    }
    let mut bases = init_bases(state, x.rows())?;
    let mut responsibilities = None;
    let mut lambda_changes = Vec::with_capacity(config.iters);
    for iteration in 1..=config.iters {
        let y = e_step(x, &bases, config)?;
        let next = normalize_bases(&m_step(x, &y, config)?);
        let change = (next.as_matrix() - bases.as_matrix()).norm();
        lambda_changes.push(change);
        bases = next;
        observe(IterationView {
            iteration,
            bases: &bases,
            responsibilities: &y,
            lambda_change: change,
        });
        responsibilities = Some(y);
    }
    let responsibilities = responsibilities.expect("iters >= 1 is validated");
    let reconstructed = reconstruct(&bases, &responsibilities)?;
    let state = if state.frozen {
        state.clone()
    } else {
        update_initial_state(state, &bases)?
    };
    Ok(EmclOutput {
        reconstructed,
        bases,
        responsibilities,
        state,
        lambda_changes,
    })
}
