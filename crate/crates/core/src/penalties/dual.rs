//! Dual norms `sup { <A, B> : pen(B) <= 1 }` of the penalty families.

use nalgebra::DMatrix;

use super::group::row_norms;
use super::nuclear::spectral_norm;
use super::sorted_l1::sorted_l1_dual;
use super::group::prox_group_slope_unchecked;
use super::sparse_group::prox_rows;

/// Relative tolerance of the bisection for the sparse group Slope dual.
pub const SGS_DUAL_TOL: f64 = 1e-6;

pub fn group_slope_dual(a: &DMatrix<f64>, lambda: &[f64]) -> f64 {
    sorted_l1_dual(&row_norms(a), lambda)
}

/// Dual of the row-wise Slope norm: the largest row dual.
pub fn row_slope_dual(a: &DMatrix<f64>, kappa: &[f64]) -> f64 {
    a.row_iter()
        .map(|r| sorted_l1_dual(&r.iter().cloned().collect::<Vec<_>>(), kappa))
        .fold(0.0, f64::max)
}

pub fn nuclear_dual(a: &DMatrix<f64>, lambda: f64) -> f64 {
    spectral_norm(a) / lambda
}

/// Dual of the sum of group Slope and row-wise Slope.
///
/// The dual unit ball of a sum of norms is the Minkowski sum of the two dual
/// balls, and `A` lies in `t` times that set exactly when the prox of
/// `t * (sum of norms)` maps `A` to zero. The smallest such `t` is located
/// by bisection between 0 and the smaller of the two individual duals.
pub fn sparse_group_slope_dual(a: &DMatrix<f64>, lambda: &[f64], kappa: &[f64]) -> f64 {
    let mut hi = group_slope_dual(a, lambda).min(row_slope_dual(a, kappa));
    if hi == 0.0 || !hi.is_finite() {
        return hi;
    }
    let mut lo = 0.0;
    let vanishes = |t: f64| {
        let out = prox_group_slope_unchecked(&prox_rows(a, kappa, t), lambda, t);
        out.iter().all(|&v| v == 0.0)
    };
    while hi - lo > SGS_DUAL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if vanishes(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
