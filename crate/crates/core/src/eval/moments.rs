use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Spectrum summary of the sample second-moment matrix `V = X^T X / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondMomentReport {
    /// Largest eigenvalue of `V`.
    pub tau_1: f64,
    /// Smallest eigenvalue of `V`, clamped at zero.
    pub tau_d: f64,
    /// Mean squared row norm, equal to `trace(V)`.
    pub m_hat: f64,
}

pub fn second_moments(x: &DMatrix<f64>) -> Result<SecondMomentReport> {
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return Err(Error::invalid("second moments need a nonempty feature matrix"));
    }
    let v = x.tr_mul(x) / n as f64;
    let eig = v.clone().symmetric_eigen();
    let tau_1 = eig.eigenvalues.max().max(0.0);
    let tau_d = eig.eigenvalues.min().max(0.0);
    let m_hat = x.row_iter().map(|r| r.norm_squared()).sum::<f64>() / n as f64;
    Ok(SecondMomentReport { tau_1, tau_d, m_hat })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_design() {
        // X^T X / n = I for these four rows
        let s = 2f64.sqrt();
        let x = DMatrix::from_row_slice(4, 2, &[s, 0.0, -s, 0.0, 0.0, s, 0.0, -s]);
        let r = second_moments(&x).unwrap();
        assert!((r.tau_1 - 1.0).abs() < 1e-12 && (r.tau_d - 1.0).abs() < 1e-12);
        assert!((r.m_hat - 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_is_singular() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, -0.5, -0.5]);
        let r = second_moments(&x).unwrap();
        assert!(r.tau_d.abs() < 1e-10);
        assert!((r.m_hat - (r.tau_1 + r.tau_d)).abs() < 1e-8);
    }
}
