//! Cosine similarity, the symmetric InfoNCE objective and inverted-softmax
//! re-ranking.
//!
//! The loss is computed on frozen features as a measure of representation
//! quality; nothing here produces gradients.

use nalgebra::DMatrix;

use crate::emcl::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;

/// Contrastive temperature `τ` used when none is given.
pub const DEFAULT_TEMPERATURE: f64 = 0.01;

/// Inverse temperature used by [`inverted_softmax`] when none is given.
pub const DEFAULT_INV_TEMPERATURE: f64 = 100.0;

/// Query × candidate similarity scores. Rows are texts, columns are videos
/// when produced by [`cosine_similarity`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    data: DMatrix<f64>,
    temperature: f64,
}

impl SimilarityMatrix {
    pub fn new(data: DMatrix<f64>, temperature: f64) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Empty("similarity matrix"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("similarity matrix".into()));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        Ok(Self { data, temperature })
    }

    pub fn from_row_slice(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::shape("similarity values", rows * cols, values.len()));
        }
        Self::new(
            DMatrix::from_row_slice(rows, cols, values),
            DEFAULT_TEMPERATURE,
        )
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        self.temperature = temperature;
        Ok(self)
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn queries(&self) -> usize {
        self.data.nrows()
    }

    pub fn candidates(&self) -> usize {
        self.data.ncols()
    }

    pub fn transpose(&self) -> Self {
        Self {
            data: self.data.transpose(),
            temperature: self.temperature,
        }
    }
}

fn unit_rows(m: &FeatureMatrix, context: &'static str) -> Result<DMatrix<f64>> {
    let mut out = m.as_matrix().clone();
    for (row, mut r) in out.row_iter_mut().enumerate() {
        let norm = r.norm();
        if norm == 0.0 {
            return Err(Error::ZeroNorm { context, row });
        }
        r /= norm;
    }
    Ok(out)
}

/// `S[i, j] = cos(text_i, video_j)`.
pub fn cosine_similarity(
    texts: &FeatureMatrix,
    videos: &FeatureMatrix,
) -> Result<SimilarityMatrix> {
    if texts.cols() != videos.cols() {
        return Err(Error::shape(
            "cosine_similarity feature dimension",
            texts.cols(),
            videos.cols(),
        ));
    }
    let t = unit_rows(texts, "texts")?;
    let v = unit_rows(videos, "videos")?;
    SimilarityMatrix::new(t * v.transpose(), DEFAULT_TEMPERATURE)
}

/// Symmetric InfoNCE over matched pairs on the diagonal:
/// the mean of the text→video and video→text cross-entropies at `τ`.
pub fn info_nce(sim: &SimilarityMatrix) -> Result<f64> {
    let s = sim.as_matrix();
    if s.nrows() != s.ncols() {
        return Err(Error::shape(
            "info_nce (square matrix of matched pairs)",
            format!("{0}x{0}", s.nrows()),
            format!("{}x{}", s.nrows(), s.ncols()),
        ));
    }
    let b = s.nrows();
    let logits = s / sim.temperature();
    let mut t2v = 0.0;
    let mut v2t = 0.0;
    for i in 0..b {
        t2v += logits[(i, i)] - log_sum_exp(logits.row(i).iter().copied());
        v2t += logits[(i, i)] - log_sum_exp(logits.column(i).iter().copied());
    }
    Ok(-0.5 * (t2v + v2t) / b as f64)
}

/// Re-weights each score by the softmax of its column taken over queries:
/// `S̃[i, j] = S[i, j] · softmax_i(inv_temperature · S[:, j])`.
///
/// Candidates that score highly against many queries are discounted. For
/// nonnegative scores the order within every column is preserved.
pub fn inverted_softmax(sim: &SimilarityMatrix, inv_temperature: f64) -> Result<SimilarityMatrix> {
    if !(inv_temperature > 0.0 && inv_temperature.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "inverse temperature must be positive, got {inv_temperature}"
        )));
    }
    let s = sim.as_matrix();
    let mut out = s.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let scaled = s.column(j) * inv_temperature;
        let norm = log_sum_exp(scaled.iter().copied());
        for (v, z) in col.iter_mut().zip(scaled.iter()) {
            *v *= (z - norm).exp();
        }
    }
    SimilarityMatrix::new(out, sim.temperature())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fm(rows: usize, cols: usize, v: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_row_slice(rows, cols, v).unwrap()
    }

    #[test]
    fn self_similarity_of_unit_rows() {
        let a = fm(2, 2, &[1.0, 0.0, 0.6, 0.8]);
        let s = cosine_similarity(&a, &a).unwrap();
        assert_relative_eq!(s.as_matrix()[(0, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(s.as_matrix()[(1, 1)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn orthogonal_and_diagonal_examples() {
        let s = cosine_similarity(&fm(1, 2, &[1.0, 0.0]), &fm(1, 2, &[0.0, 3.0])).unwrap();
        assert_eq!(s.as_matrix()[(0, 0)], 0.0);
        let s = cosine_similarity(&fm(1, 2, &[1.0, 1.0]), &fm(1, 2, &[1.0, 0.0])).unwrap();
        assert_relative_eq!(s.as_matrix()[(0, 0)], 1.0 / 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn zero_row_is_named() {
        let err = cosine_similarity(&fm(2, 2, &[1.0, 0.0, 0.0, 0.0]), &fm(1, 2, &[1.0, 1.0]));
        assert_eq!(
            err,
            Err(Error::ZeroNorm {
                context: "texts",
                row: 1
            })
        );
    }

    #[test]
    fn single_pair_has_zero_loss() {
        let s = SimilarityMatrix::from_row_slice(1, 1, &[0.3]).unwrap();
        assert_eq!(info_nce(&s).unwrap(), 0.0);
    }

    #[test]
    fn uniform_similarity_gives_ln_b() {
        for tau in [0.01, 0.5, 3.0] {
            let s = SimilarityMatrix::new(DMatrix::from_element(5, 5, 0.42), tau).unwrap();
            assert!((info_nce(&s).unwrap() - 5f64.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn dominant_diagonal_has_tiny_loss() {
        let s = SimilarityMatrix::new(DMatrix::identity(8, 8), 0.01).unwrap();
        // closed form: ln(1 + 7 e^{-100})
        let expected = (7.0 * (-100f64).exp()).ln_1p();
        let loss = info_nce(&s).unwrap();
        assert!(loss < 1e-4);
        assert_relative_eq!(loss, expected, max_relative = 1e-9);
    }

    #[test]
    fn non_square_loss_is_rejected() {
        let s = SimilarityMatrix::from_row_slice(1, 2, &[0.1, 0.2]).unwrap();
        assert!(matches!(info_nce(&s), Err(Error::Shape { .. })));
    }

    #[test]
    fn inverted_softmax_singleton_is_identity() {
        let s = SimilarityMatrix::from_row_slice(1, 1, &[0.7]).unwrap();
        assert_eq!(inverted_softmax(&s, 100.0).unwrap(), s);
    }

    #[test]
    fn inverted_softmax_two_by_two_matches_hand_softmax() {
        let raw: [[f64; 2]; 2] = [[0.9, 0.8], [0.1, 0.85]];
        let s = SimilarityMatrix::from_row_slice(2, 2, &[0.9, 0.8, 0.1, 0.85]).unwrap();
        let out = inverted_softmax(&s, 100.0).unwrap();
        for j in 0..2 {
            let e: Vec<f64> = raw.iter().map(|row| (100.0 * row[j]).exp()).collect();
            let z: f64 = e.iter().sum();
            for (i, row) in raw.iter().enumerate() {
                assert_relative_eq!(
                    out.as_matrix()[(i, j)],
                    row[j] * e[i] / z,
                    max_relative = 1e-12
                );
            }
        }
        // query 2 still prefers candidate 2 while candidate 2's weight for
        // query 1 collapses to e^{-5}/(1+e^{-5})
        assert!(out.as_matrix()[(1, 1)] > out.as_matrix()[(1, 0)]);
        assert_relative_eq!(
            out.as_matrix()[(0, 1)],
            0.8 / (1.0 + 5f64.exp()),
            max_relative = 1e-12
        );
    }

    #[test]
    fn inverted_softmax_saturates() {
        let s = SimilarityMatrix::from_row_slice(3, 1, &[0.9, 0.5, 0.4]).unwrap();
        let out = inverted_softmax(&s, 1e4).unwrap();
        assert_relative_eq!(out.as_matrix()[(0, 0)], 0.9, epsilon = 1e-12);
        assert!(out.as_matrix()[(1, 0)] < 1e-100);
    }

    #[test]
    fn inverted_softmax_rejects_bad_temperature() {
        let s = SimilarityMatrix::from_row_slice(1, 1, &[0.7]).unwrap();
        assert!(inverted_softmax(&s, 0.0).is_err());
    }
}
