//! Group Slope: the sorted-l1 norm of the vector of row l2 norms.

use nalgebra::DMatrix;

use super::sorted_l1::{check_prox_weights, check_step, prox_sorted_l1_unchecked, sorted_l1_norm};
use crate::error::{Error, Result};

pub(crate) fn row_norms(b: &DMatrix<f64>) -> Vec<f64> {
    b.row_iter().map(|r| r.norm()).collect()
}

pub fn group_slope_norm(b: &DMatrix<f64>, lambda: &[f64]) -> f64 {
    sorted_l1_norm(&row_norms(b), lambda)
}

/// Exact prox of `step * sum_j lambda_j |B|_(j)`.
///
/// The penalty is a symmetric gauge of the row-norm vector, so the prox
/// shrinks the row norms with the sorted-l1 prox and rescales every row
/// along its own direction. Zero rows stay zero.
pub fn prox_group_slope(b: &DMatrix<f64>, lambda: &[f64], step: f64) -> Result<DMatrix<f64>> {
    Error::check_dim("lambda length", b.nrows(), lambda.len())?;
    check_prox_weights(lambda)?;
    check_step(step)?;
    Ok(prox_group_slope_unchecked(b, lambda, step))
}

pub(crate) fn prox_group_slope_unchecked(b: &DMatrix<f64>, lambda: &[f64], step: f64) -> DMatrix<f64> {
    let norms = row_norms(b);
    let shrunk = prox_sorted_l1_unchecked(&norms, lambda, step);
    let mut out = b.clone();
    for (j, mut row) in out.row_iter_mut().enumerate() {
        if shrunk[j] == 0.0 || norms[j] == 0.0 {
            row.fill(0.0);
        } else {
            row *= shrunk[j] / norms[j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_stays_zero() {
        let z = DMatrix::zeros(3, 2);
        assert_eq!(prox_group_slope(&z, &[1.0, 0.5, 0.1], 1.0).unwrap(), z);
    }

    #[test]
    fn single_row_full_shrinkage() {
        let b = DMatrix::from_row_slice(1, 2, &[0.3, -0.4]);
        let out = prox_group_slope(&b, &[0.6], 1.0).unwrap();
        assert_eq!(out, DMatrix::zeros(1, 2));
        let out = prox_group_slope(&b, &[0.25], 1.0).unwrap();
        // norm 0.5 -> 0.25
        assert!((out[(0, 0)] - 0.15).abs() < 1e-15 && (out[(0, 1)] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn norm_definition() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 3.0, 0.0]);
        assert_eq!(group_slope_norm(&b, &[2.0, 1.0]), 7.0);
    }
}
