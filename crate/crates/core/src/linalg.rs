//! Small dense linear-algebra helpers shared by the diagnostics.
//!
//! Decompositions go through faer, whose SVD stays accurate on the
//! rank-deficient matrices that centering produces.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative tolerance used for numerical rank throughout the crate.
pub const RANK_REL_TOL: f64 = 1e-6;

/// Thin decomposition `m = U diag(s) Vᵀ`, singular values descending.
pub(crate) struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub(crate) fn thin_svd(m: &DMatrix<f64>) -> Result<ThinSvd> {
    let svd = to_faer(m)
        .thin_svd()
        .map_err(|e| Error::NonFinite(format!("SVD failed: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let r = s.nrows();
    Ok(ThinSvd {
        u: DMatrix::from_fn(u.nrows(), r, |i, j| u[(i, j)]),
        s: (0..r).map(|i| s[i]).collect(),
        v: DMatrix::from_fn(v.nrows(), r, |i, j| v[(i, j)]),
    })
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut s = to_faer(m)
        .singular_values()
        .map_err(|e| Error::NonFinite(format!("SVD failed: {e:?}")))?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Number of singular values above `rel_tol` times the largest one.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    let s = singular_values(m)?;
    Ok(match s.first() {
        Some(&max) if max > 0.0 => s.iter().filter(|&&v| v > rel_tol * max).count(),
        _ => 0,
    })
}

pub(crate) fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Row-wise softmax with max subtraction.
pub(crate) fn softmax_rows_in_place(m: &mut DMatrix<f64>) {
    for mut row in m.row_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
}

/// `ln Σ exp(v)` with max subtraction; `-inf` for an empty slice.
pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}
