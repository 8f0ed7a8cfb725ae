//! Diagonal-covariance Gaussian mixture fitted by EM.
//!
//! Serves as a reference implementation of EM mechanics: responsibilities
//! are computed in the log domain and the total log-likelihood is traced
//! after every iteration, which must never decrease.

use std::f64::consts::PI;

use log::warn;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::emcl::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;

/// Lower bound applied to every variance after an M-step.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Components whose total responsibility falls below this are reinitialized.
const DEAD_MASS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    pub means: Vec<Vec<f64>>,
    /// Diagonal of each component covariance.
    pub variances: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl GmmParams {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::Empty("mixture needs at least one component"));
        }
        if self.means.len() != k || self.variances.len() != k {
            return Err(Error::shape("mixture components", k, self.means.len()));
        }
        for (c, (mu, var)) in self.means.iter().zip(&self.variances).enumerate() {
            if mu.len() != dim || var.len() != dim {
                return Err(Error::shape("mixture component dimension", dim, mu.len()));
            }
            if var.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::NotPositiveDefinite(c));
            }
            if mu.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("mean of component {c}")));
            }
        }
        if self.weights.iter().any(|&w| w.is_nan() || w < 0.0) {
            return Err(Error::InvalidArgument(
                "mixture weights must be >= 0".into(),
            ));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(())
    }

    fn log_density(&self, c: usize, x: &[f64]) -> f64 {
        let mu = &self.means[c];
        let var = &self.variances[c];
        let mut acc = 0.0;
        for ((xi, mi), vi) in x.iter().zip(mu).zip(var) {
            let d = xi - mi;
            acc += d * d / vi + vi.ln() + (2.0 * PI).ln();
        }
        -0.5 * acc
    }
}

/// `N × K` posterior assignment probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmResponsibilities(DMatrix<f64>);

impl GmmResponsibilities {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidArgument(
                "responsibilities must lie in [0, 1]".into(),
            ));
        }
        if let Some(i) = data.row_iter().position(|r| (r.sum() - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "responsibility row {i} does not sum to 1"
            )));
        }
        Ok(Self(data))
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Log-domain E-step; also returns the total log-likelihood of `data`.
fn e_step_with_likelihood(
    data: &FeatureMatrix,
    params: &GmmParams,
) -> Result<(GmmResponsibilities, f64)> {
    params.validate(data.cols())?;
    let (n, k) = (data.rows(), params.k());
    let log_weights: Vec<f64> = params.weights.iter().map(|w| w.ln()).collect();
    let mut resp = DMatrix::zeros(n, k);
    let mut total = 0.0;
    let mut log_joint = vec![0.0; k];
    for i in 0..n {
        let x = data.row(i);
        for c in 0..k {
            log_joint[c] = log_weights[c] + params.log_density(c, &x);
        }
        let norm = log_sum_exp(log_joint.iter().copied());
        if !norm.is_finite() {
            return Err(Error::NonFinite(format!("likelihood of sample {i}")));
        }
        total += norm;
        for c in 0..k {
            resp[(i, c)] = (log_joint[c] - norm).exp();
        }
    }
    Ok((GmmResponsibilities(resp), total))
}

pub fn gmm_e_step(data: &FeatureMatrix, params: &GmmParams) -> Result<GmmResponsibilities> {
    e_step_with_likelihood(data, params).map(|(r, _)| r)
}

/// Total log-likelihood `Σ_n ln Σ_k π_k N(x_n | μ_k, Σ_k)`.
pub fn gmm_log_likelihood(data: &FeatureMatrix, params: &GmmParams) -> Result<f64> {
    e_step_with_likelihood(data, params).map(|(_, ll)| ll)
}

fn data_variance(data: &FeatureMatrix) -> Vec<f64> {
    let m = data.as_matrix();
    let n = m.nrows() as f64;
    m.column_iter()
        .map(|c| {
            let mean = c.sum() / n;
            let v = c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            v.max(VARIANCE_FLOOR)
        })
        .collect()
}

/// Closed-form M-step with the variance floor applied.
///
/// A component with zero total responsibility is moved onto a data point
/// drawn from `seed` and given the pooled data variance.
pub fn gmm_m_step(
    data: &FeatureMatrix,
    resp: &GmmResponsibilities,
    seed: u64,
) -> Result<GmmParams> {
    let r = resp.as_matrix();
    if r.nrows() != data.rows() {
        return Err(Error::shape(
            "gmm_m_step responsibility rows",
            data.rows(),
            r.nrows(),
        ));
    }
    let x = data.as_matrix();
    let (n, d, k) = (x.nrows(), x.ncols(), r.ncols());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    let mut masses = Vec::with_capacity(k);
    for c in 0..k {
        let mass = r.column(c).sum();
        if mass < DEAD_MASS {
            let pick = rng.random_range(0..n);
            warn!("mixture component {c} lost all responsibility; reinitialized at sample {pick}");
            means.push(data.row(pick));
            variances.push(data_variance(data));
            masses.push(1.0);
            continue;
        }
        let mut mu = vec![0.0; d];
        for i in 0..n {
            let w = r[(i, c)];
            for (m, xv) in mu.iter_mut().zip(x.row(i).iter()) {
                *m += w * xv;
            }
        }
        mu.iter_mut().for_each(|m| *m /= mass);
        let mut var = vec![0.0; d];
        for i in 0..n {
            let w = r[(i, c)];
            for ((v, xv), m) in var.iter_mut().zip(x.row(i).iter()).zip(&mu) {
                *v += w * (xv - m).powi(2);
            }
        }
        var.iter_mut()
            .for_each(|v| *v = (*v / mass).max(VARIANCE_FLOOR));
        means.push(mu);
        variances.push(var);
        masses.push(mass);
    }
    let total: f64 = masses.iter().sum();
    let weights = masses.iter().map(|m| m / total).collect();
    Ok(GmmParams {
        means,
        variances,
        weights,
    })
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub params: GmmParams,
    /// Log-likelihood after each iteration's M-step.
    pub log_likelihood: Vec<f64>,
}

/// Seeded initialization: k-means++ style seeding of the means, pooled data
/// variance and uniform weights.
pub fn gmm_init(data: &FeatureMatrix, k: usize, seed: u64) -> Result<GmmParams> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if k > data.rows() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} available samples",
            data.rows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..data.rows()).map(|i| data.row(i)).collect();
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let mut means = vec![rows[rng.random_range(0..rows.len())].clone()];
    while means.len() < k {
        let dist: Vec<f64> = rows
            .iter()
            .map(|r| means.iter().map(|m| sq(r, m)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            dist.iter()
                .position(|&w| {
                    target -= w;
                    target <= 0.0
                })
                .unwrap_or(rows.len() - 1)
        } else {
            rng.random_range(0..rows.len())
        };
        means.push(rows[pick].clone());
    }
    let var = data_variance(data);
    Ok(GmmParams {
        means,
        variances: vec![var; k],
        weights: vec![1.0 / k as f64; k],
    })
}

pub fn gmm_fit(data: &FeatureMatrix, k: usize, iters: usize, seed: u64) -> Result<GmmFit> {
    if iters == 0 {
        return Err(Error::InvalidArgument("iters must be >= 1".into()));
    }
    let mut params = gmm_init(data, k, seed)?;
    let mut trace = Vec::with_capacity(iters);
    for t in 0..iters {
        let resp = gmm_e_step(data, &params)?;
        params = gmm_m_step(data, &resp, seed.wrapping_add(t as u64 + 1))?;
        trace.push(gmm_log_likelihood(data, &params)?);
    }
    Ok(GmmFit {
        params,
        log_likelihood: trace,
    })
}
