//! Nuclear norm and singular value thresholding.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{singular_values, svd};

/// Thresholded singular values below this are set to zero.
pub const SINGULAR_VALUE_SNAP: f64 = 1e-12;

pub fn nuclear_norm(b: &DMatrix<f64>) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    singular_values(b).iter().sum()
}

pub fn spectral_norm(b: &DMatrix<f64>) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    singular_values(b)[0]
}

/// Prox of `step * lambda * ||B||_*`: soft-thresholds the singular values.
pub fn prox_nuclear(b: &DMatrix<f64>, lambda: f64, step: f64) -> Result<DMatrix<f64>> {
    if !(lambda.is_finite() && lambda >= 0.0 && step.is_finite() && step >= 0.0) {
        return Err(Error::invalid(format!(
            "nuclear prox needs finite nonnegative lambda and step, got {lambda} and {step}"
        )));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("prox input has non-finite entries"));
    }
    if b.is_empty() {
        return Ok(b.clone());
    }
    let threshold = step * lambda;
    Ok(svd(b).recompose_with(|s| {
        let t = s - threshold;
        if t > SINGULAR_VALUE_SNAP {
            t
        } else {
            0.0
        }
    }))
}
