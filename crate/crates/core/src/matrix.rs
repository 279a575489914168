//! Feature and label matrices with validated invariants.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Global class identifier.
pub type ClassId = u32;

/// `n × d` matrix of finite features, one row per utterance.
///
/// The column count is at least one; zero rows is a valid (empty) batch.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix(DMatrix<f64>);

impl FeatureMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.ncols() == 0 {
            return Err(Error::InvalidDimension);
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(Self(matrix))
    }

    /// Builds from row-major values.
    pub fn from_row_slice(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, values))
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(rows, cols))
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

    pub fn row_values(&self, row: usize) -> Vec<f64> {
        self.0.row(row).iter().copied().collect()
    }

    /// Stacks batches vertically; all must share the column count.
    pub fn vstack(parts: &[&FeatureMatrix]) -> Result<Self> {
        let cols = parts.first().ok_or(Error::InvalidDimension)?.cols();
        if let Some(p) = parts.iter().find(|p| p.cols() != cols) {
            return Err(Error::Shape(format!(
                "cannot stack {} columns onto {cols}",
                p.cols()
            )));
        }
        let rows = parts.iter().map(|p| p.rows()).sum();
        let mut out = DMatrix::zeros(rows, cols);
        let mut at = 0;
        for p in parts {
            out.rows_mut(at, p.rows()).copy_from(&p.0);
            at += p.rows();
        }
        Ok(Self(out))
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self(self.0.select_rows(indices))
    }
}

/// One-hot targets for a batch, with the global class id of every column.
///
/// Every row holds exactly one `1`; a column may be all zero when its class
/// is declared but has no samples in this batch.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMatrix {
    class_ids: Vec<ClassId>,
    targets: DMatrix<f64>,
}

impl LabelMatrix {
    /// Encodes `labels` against the declared column classes.
    pub fn one_hot(labels: &[ClassId], class_ids: &[ClassId]) -> Result<Self> {
        check_unique(class_ids)?;
        let mut targets = DMatrix::zeros(labels.len(), class_ids.len());
        for (row, label) in labels.iter().enumerate() {
            let col = class_ids
                .iter()
                .position(|c| c == label)
                .ok_or_else(|| {
                    Error::InvalidLabels(format!("label {label} at row {row} is not a declared class"))
                })?;
            targets[(row, col)] = 1.0;
        }
        Ok(Self {
            class_ids: class_ids.to_vec(),
            targets,
        })
    }

    /// Validates a dense target matrix: entries in {0, 1}, one `1` per row.
    pub fn from_dense(class_ids: Vec<ClassId>, targets: DMatrix<f64>) -> Result<Self> {
        check_unique(&class_ids)?;
        if targets.ncols() != class_ids.len() {
            return Err(Error::Shape(format!(
                "{} label columns for {} class ids",
                targets.ncols(),
                class_ids.len()
            )));
        }
        for (row, r) in targets.row_iter().enumerate() {
            if r.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidLabels(format!("row {row} has a non-binary entry")));
            }
            if r.sum() != 1.0 {
                return Err(Error::InvalidLabels(format!("row {row} is not one-hot")));
            }
        }
        Ok(Self { class_ids, targets })
    }

    pub fn rows(&self) -> usize {
        self.targets.nrows()
    }

    pub fn class_ids(&self) -> &[ClassId] {
        &self.class_ids
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    /// Decodes each row back to its class id.
    pub fn labels(&self) -> Vec<ClassId> {
        self.targets
            .row_iter()
            .map(|r| self.class_ids[r.iter().position(|&v| v == 1.0).unwrap_or(0)])
            .collect()
    }
}

fn check_unique(class_ids: &[ClassId]) -> Result<()> {
    let mut seen = HashSet::with_capacity(class_ids.len());
    for &c in class_ids {
        if !seen.insert(c) {
            return Err(Error::InvalidLabels(format!("class id {c} declared twice")));
        }
    }
    Ok(())
}

/// `‖a − b‖_F / ‖b‖_F`, or the absolute norm when `b` is zero.
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "relative_frobenius shape mismatch");
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}
