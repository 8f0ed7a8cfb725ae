use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::all_finite;

/// A stacked batch of embeddings, one sample per row.
///
/// For a paired batch the first `B` rows hold video features and the next
/// `B` rows hold text features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(DMatrix<f64>);

impl FeatureMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Empty(
                "feature matrix needs at least one row and column",
            ));
        }
        if !all_finite(&data) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        Ok(Self(data))
    }

    pub fn from_row_slice(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::shape(
                "feature matrix values",
                rows * cols,
                values.len(),
            ));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::Shape {
                context: "feature matrix rows",
                expected: format!("{cols} columns"),
                actual: format!("{} columns in row {i}", r.len()),
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_slice(rows.len(), cols, &flat)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    /// Stacks `top` above `bottom`.
    pub fn vstack(top: &FeatureMatrix, bottom: &FeatureMatrix) -> Result<Self> {
        if top.cols() != bottom.cols() {
            return Err(Error::shape("vstack", top.cols(), bottom.cols()));
        }
        let mut m = DMatrix::zeros(top.rows() + bottom.rows(), top.cols());
        m.rows_mut(0, top.rows()).copy_from(&top.0);
        m.rows_mut(top.rows(), bottom.rows()).copy_from(&bottom.0);
        Ok(Self(m))
    }

    /// Rows `start..end` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.rows() {
            return Err(Error::InvalidArgument(format!(
                "row range {start}..{end} invalid for {} rows",
                self.rows()
            )));
        }
        Ok(Self(self.0.rows(start, end - start).into_owned()))
    }
}

/// Subspace bases λ, one column per subspace, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    data: DMatrix<f64>,
    dead: Vec<usize>,
}

impl BasisMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        Self::with_dead(data, Vec::new())
    }

    pub(crate) fn with_dead(data: DMatrix<f64>, dead: Vec<usize>) -> Result<Self> {
        if !all_finite(&data) {
            return Err(Error::NonFinite("basis matrix".into()));
        }
        Ok(Self { data, dead })
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    /// Number of subspaces.
    pub fn k(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Subspaces whose responsibility mass vanished or whose basis became zero.
    pub fn dead_subspaces(&self) -> &[usize] {
        &self.dead
    }

    /// Per-column mean over samples.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.rows() as f64;
        self.data.column_iter().map(|c| c.sum() / n).collect()
    }
}

/// Soft assignment of every coding bit (feature dimension) to the subspaces.
/// Shape `D × K`; rows are probability vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponsibilityMatrix(DMatrix<f64>);

impl ResponsibilityMatrix {
    /// Validates entries in `[0, 1]` and unit row sums within `1e-6`.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if !all_finite(&data) {
            return Err(Error::NonFinite("responsibility matrix".into()));
        }
        if data.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidArgument(
                "responsibilities must lie in [0, 1]".into(),
            ));
        }
        if let Some(i) = data.row_iter().position(|r| (r.sum() - 1.0).abs() > 1e-6) {
            return Err(Error::InvalidArgument(format!(
                "responsibility row {i} does not sum to 1"
            )));
        }
        Ok(Self(data))
    }

    pub(crate) fn from_softmax(data: DMatrix<f64>) -> Self {
        Self(data)
    }

    /// Number of coding bits.
    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn k(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}
