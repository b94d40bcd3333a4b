//! Datasets and coefficient matrices.
//!
//! Class labels are 0-based everywhere inside the crate. The CSV formats and
//! the command line use 1-based labels `1..=L`; conversion happens only in
//! [`Dataset::from_one_based`] and the readers/writers in [`crate::io`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the column mean square of a standardized design.
pub const STANDARDIZATION_TOL: f64 = 1e-8;

/// Tolerance on row sums of a matrix flagged as centered.
pub const CENTERING_TOL: f64 = 1e-10;

/// A sample `(X_i, Y_i)`, `i = 1..n`, with `d` features and `L` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    standardized: bool,
}

impl Dataset {
    /// Builds a dataset from an `n x d` feature matrix and 0-based labels.
    pub fn new(features: DMatrix<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let (n, d) = features.shape();
        if n == 0 || d == 0 {
            return Err(Error::invalid(format!(
                "dataset needs n >= 1 and d >= 1, got {n}x{d}"
            )));
        }
        if num_classes < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        Error::check_dim("number of labels", n, labels.len())?;
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(Error::invalid(format!(
                "label {} of sample {} outside 1..={num_classes}",
                y + 1,
                i + 1
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
        Ok(Dataset {
            features,
            labels,
            num_classes,
            standardized: false,
        })
    }

    /// Builds a dataset from labels in `1..=num_classes`.
    pub fn from_one_based(
        features: DMatrix<f64>,
        labels: &[i64],
        num_classes: usize,
    ) -> Result<Self> {
        let labels = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                if y < 1 || y as usize > num_classes {
                    Err(Error::invalid(format!(
                        "label {y} of sample {} outside 1..={num_classes}",
                        i + 1
                    )))
                } else {
                    Ok(y as usize - 1)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(features, labels, num_classes)
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    /// 0-based labels.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Per-column mean squares `(1/n) sum_i X_ij^2`.
    pub fn column_mean_squares(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.features
            .column_iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>() / n)
            .collect()
    }

    /// True when every column has mean square 1 within [`STANDARDIZATION_TOL`].
    pub fn check_standardization(&self) -> bool {
        self.column_mean_squares()
            .iter()
            .all(|m| (m - 1.0).abs() <= STANDARDIZATION_TOL)
    }

    /// Rescales every column to unit mean square and sets the flag.
    pub fn standardize(&self) -> Result<Self> {
        let scales = self.column_mean_squares();
        if let Some(j) = scales.iter().position(|&m| m <= 0.0) {
            return Err(Error::invalid(format!(
                "column x{} is identically zero and cannot be standardized",
                j + 1
            )));
        }
        let mut features = self.features.clone();
        for (mut col, m) in features.column_iter_mut().zip(scales) {
            col /= m.sqrt();
        }
        Ok(Dataset {
            features,
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            standardized: true,
        })
    }

    /// Sets the standardized flag after verifying the invariant.
    pub fn mark_standardized(mut self) -> Result<Self> {
        if !self.check_standardization() {
            return Err(Error::invalid(
                "columns do not have unit mean square within 1e-8",
            ));
        }
        self.standardized = true;
        Ok(self)
    }

    /// One-hot label matrix, `n x L`.
    pub fn indicators(&self) -> DMatrix<f64> {
        let mut xi = DMatrix::zeros(self.n(), self.num_classes);
        for (i, &y) in self.labels.iter().enumerate() {
            xi[(i, y)] = 1.0;
        }
        xi
    }

    /// Copy restricted to a subset of feature columns.
    pub fn select_features(&self, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::invalid("empty feature selection"));
        }
        if let Some(&j) = columns.iter().find(|&&j| j >= self.d()) {
            return Err(Error::invalid(format!("feature index {j} out of range")));
        }
        Ok(Dataset {
            features: self.features.select_columns(columns),
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            standardized: false,
        })
    }
}

/// A `d x L` coefficient matrix `B` with columns `beta_1..beta_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    values: DMatrix<f64>,
    centered: bool,
}

impl CoefficientMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("coefficient matrix has non-finite entries"));
        }
        Ok(CoefficientMatrix {
            values,
            centered: false,
        })
    }

    /// Wraps a matrix that must already satisfy `B 1 = 0`.
    pub fn new_centered(values: DMatrix<f64>) -> Result<Self> {
        let mut b = Self::new(values)?;
        let worst = max_abs_row_sum(&b.values);
        if worst > CENTERING_TOL {
            return Err(Error::invalid(format!(
                "row sums must vanish for a centered matrix (max |row sum| = {worst:.3e})"
            )));
        }
        b.centered = true;
        Ok(b)
    }

    pub fn zeros(d: usize, num_classes: usize) -> Self {
        CoefficientMatrix {
            values: DMatrix::zeros(d, num_classes),
            centered: true,
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn d(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.values.ncols()
    }

    /// Row-centered copy; see [`center_rows`].
    pub fn center_rows(&self) -> Self {
        CoefficientMatrix {
            values: center_rows_unchecked(&self.values),
            centered: true,
        }
    }

    /// Number of rows with a non-zero entry.
    pub fn nonzero_rows(&self) -> usize {
        self.values
            .row_iter()
            .filter(|r| r.iter().any(|&v| v != 0.0))
            .count()
    }

    /// Non-zero count of every row.
    pub fn row_nonzeros(&self) -> Vec<usize> {
        self.values
            .row_iter()
            .map(|r| r.iter().filter(|&&v| v != 0.0).count())
            .collect()
    }

    /// Numerical rank: singular values above `tol * max(1, sigma_max)`.
    pub fn numerical_rank(&self, tol: f64) -> usize {
        let sv = crate::linalg::singular_values(&self.values);
        let top = sv.iter().cloned().fold(0.0, f64::max);
        sv.iter().filter(|&&s| s > tol * top.max(1.0)).count()
    }
}

/// Subtracts each row's mean, so that `B 1 = 0`.
///
/// The argmax over columns of `B^T x` is unchanged for every `x` because
/// each score moves by the same amount `-mean^T x`. A row whose sum is
/// already zero up to rounding is returned unchanged, which
/// makes the operation exactly idempotent.
pub fn center_rows(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("cannot center a matrix with non-finite entries"));
    }
    Ok(center_rows_unchecked(b))
}

pub(crate) fn center_rows_unchecked(b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = b.clone();
    let cols = out.ncols() as f64;
    for mut row in out.row_iter_mut() {
        for _ in 0..8 {
            let sum = row.sum();
            // rows already centered to rounding level are left untouched
            if sum.abs() <= 8.0 * cols * f64::EPSILON * row.abs().sum() {
                break;
            }
            row.add_scalar_mut(-sum / cols);
        }
    }
    out
}

pub(crate) fn max_abs_row_sum(b: &DMatrix<f64>) -> f64 {
    b.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max)
}

/// Largest `|row mean|` of a matrix.
pub fn max_abs_row_mean(b: &DMatrix<f64>) -> f64 {
    if b.ncols() == 0 {
        return 0.0;
    }
    max_abs_row_sum(b) / b.ncols() as f64
}

/// Serialized description of a fitted coefficient matrix (the JSON sidecar).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientMetadata {
    pub d: usize,
    #[serde(rename = "L")]
    pub num_classes: usize,
    pub centered: bool,
    pub penalty: Option<crate::penalty_spec::PenaltySpec>,
}
