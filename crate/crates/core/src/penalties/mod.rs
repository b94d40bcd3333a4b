//! Norm values, proximal operators, dual norms and weight generators.

mod dual;
mod group;
mod nuclear;
mod sorted_l1;
mod sparse_group;
mod weights;

use nalgebra::DMatrix;

pub use dual::{group_slope_dual, nuclear_dual, row_slope_dual, sparse_group_slope_dual, SGS_DUAL_TOL};
pub use group::{group_slope_norm, prox_group_slope};
pub use nuclear::{nuclear_norm, prox_nuclear, spectral_norm, SINGULAR_VALUE_SNAP};
pub use sorted_l1::{prox_sorted_l1, sorted_l1_dual, sorted_l1_norm};
pub use sparse_group::{
    dykstra, prox_sparse_group_slope, prox_sparse_group_slope_centered,
    prox_sparse_group_slope_composition, prox_sparse_group_slope_dykstra, row_slope_norm,
    sparse_group_slope_norm, DYKSTRA_MAX_ITER,
};
pub use weights::{
    group_lasso_weight, group_slope_weights, nuclear_lambda, sparse_group_lasso_weights,
    sparse_group_slope_weights, WeightConfig,
};

use crate::error::Result;
use crate::penalty_spec::PenaltySpec;

/// Penalty value `pen(B)` for the given specification.
pub fn penalty_value(spec: &PenaltySpec, b: &DMatrix<f64>) -> Result<f64> {
    spec.check_shape(b.nrows(), b.ncols())?;
    Ok(penalty_value_unchecked(spec, b))
}

pub(crate) fn penalty_value_unchecked(spec: &PenaltySpec, b: &DMatrix<f64>) -> f64 {
    match spec {
        PenaltySpec::GroupSlope { lambda } => group_slope_norm(b, lambda.as_slice()),
        PenaltySpec::SparseGroupSlope { lambda, kappa } => {
            sparse_group_slope_norm(b, lambda.as_slice(), kappa.as_slice())
        }
        PenaltySpec::Nuclear { lambda } => lambda * nuclear_norm(b),
    }
}

/// Options of [`prox`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxOptions {
    /// Tolerance of the inner Dykstra iterations.
    pub tol: f64,
    /// Restrict the sparse group Slope prox to the subspace `B 1 = 0`.
    pub centered: bool,
}

impl Default for ProxOptions {
    fn default() -> Self {
        ProxOptions {
            tol: 1e-9,
            centered: false,
        }
    }
}

/// Prox of `step * pen` for any penalty family.
///
/// `centered` only affects sparse group Slope; the group Slope and nuclear
/// proxes already map centered matrices to centered matrices.
pub fn prox(spec: &PenaltySpec, b: &DMatrix<f64>, step: f64, opts: &ProxOptions) -> Result<DMatrix<f64>> {
    spec.check_shape(b.nrows(), b.ncols())?;
    match spec {
        PenaltySpec::GroupSlope { lambda } => prox_group_slope(b, lambda.as_slice(), step),
        PenaltySpec::SparseGroupSlope { lambda, kappa } if opts.centered => {
            prox_sparse_group_slope_centered(b, lambda.as_slice(), kappa.as_slice(), step, opts.tol)
        }
        PenaltySpec::SparseGroupSlope { lambda, kappa } => {
            prox_sparse_group_slope(b, lambda.as_slice(), kappa.as_slice(), step, opts.tol)
        }
        PenaltySpec::Nuclear { lambda } => prox_nuclear(b, *lambda, step),
    }
}

/// Dual norm `sup { <A, B> : pen(B) <= 1 }`.
///
/// Group Slope uses the exact cumulative-ratio form; sparse group Slope is
/// resolved by bisection to relative accuracy [`SGS_DUAL_TOL`] and returns
/// the upper end of the final bracket.
pub fn dual_norm(spec: &PenaltySpec, a: &DMatrix<f64>) -> Result<f64> {
    spec.check_shape(a.nrows(), a.ncols())?;
    Ok(match spec {
        PenaltySpec::GroupSlope { lambda } => group_slope_dual(a, lambda.as_slice()),
        PenaltySpec::SparseGroupSlope { lambda, kappa } => {
            sparse_group_slope_dual(a, lambda.as_slice(), kappa.as_slice())
        }
        PenaltySpec::Nuclear { lambda } => nuclear_dual(a, *lambda),
    })
}
