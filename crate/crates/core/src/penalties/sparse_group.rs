//! Sparse group Slope: group Slope on the row norms plus Slope within each row.
//!
//! The prox of the sum is evaluated two ways. The composition
//! `prox_group(prox_rows(B))` is tried first and accepted only when the
//! row-wise residual passes a subgradient test at the composed point;
//! otherwise, and always when the zero-row-sum constraint is added, the
//! prox of the sum is computed with the parallel Dykstra-like splitting.

use nalgebra::DMatrix;

use super::group::{group_slope_norm, prox_group_slope_unchecked};
use super::sorted_l1::{check_prox_weights, check_step, prox_sorted_l1_unchecked, sorted_l1_dual, sorted_l1_norm};
use crate::data::{center_rows_unchecked, max_abs_row_sum};
use crate::error::{Error, Result};

/// Iteration cap of the Dykstra loop.
pub const DYKSTRA_MAX_ITER: usize = 200_000;

/// `sum_j sum_l kappa_l |B|_j(l)`.
pub fn row_slope_norm(b: &DMatrix<f64>, kappa: &[f64]) -> f64 {
    b.row_iter()
        .map(|r| sorted_l1_norm(&r.iter().cloned().collect::<Vec<_>>(), kappa))
        .sum()
}

pub fn sparse_group_slope_norm(b: &DMatrix<f64>, lambda: &[f64], kappa: &[f64]) -> f64 {
    group_slope_norm(b, lambda) + row_slope_norm(b, kappa)
}

/// Row-wise sorted-l1 prox with weights `kappa`.
pub(crate) fn prox_rows(b: &DMatrix<f64>, kappa: &[f64], step: f64) -> DMatrix<f64> {
    let mut out = b.clone();
    let mut buf = vec![0.0; b.ncols()];
    for j in 0..b.nrows() {
        for (l, v) in buf.iter_mut().enumerate() {
            *v = b[(j, l)];
        }
        let shrunk = prox_sorted_l1_unchecked(&buf, kappa, step);
        for (l, v) in shrunk.into_iter().enumerate() {
            out[(j, l)] = v;
        }
    }
    out
}

/// `prox_group(prox_rows(B))`.
pub fn prox_sparse_group_slope_composition(
    b: &DMatrix<f64>,
    lambda: &[f64],
    kappa: &[f64],
    step: f64,
) -> Result<DMatrix<f64>> {
    check_args(b, lambda, kappa, step)?;
    Ok(compose(b, lambda, kappa, step))
}

fn compose(b: &DMatrix<f64>, lambda: &[f64], kappa: &[f64], step: f64) -> DMatrix<f64> {
    prox_group_slope_unchecked(&prox_rows(b, kappa, step), lambda, step)
}

fn check_args(b: &DMatrix<f64>, lambda: &[f64], kappa: &[f64], step: f64) -> Result<()> {
    Error::check_dim("lambda length", b.nrows(), lambda.len())?;
    Error::check_dim("kappa length", b.ncols(), kappa.len())?;
    check_prox_weights(lambda)?;
    check_prox_weights(kappa)?;
    check_step(step)?;
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("prox input has non-finite entries"));
    }
    Ok(())
}

/// Whether `(B - V) / step` is a subgradient of the row-wise Slope norm at `U`,
/// where `V = prox_rows(B)` and `U = prox_group(V)`.
///
/// Membership test for a norm subdifferential: dual norm at most one and
/// the pairing with `U` equal to the norm of `U`, both within `tol`.
fn composition_is_optimal(
    b: &DMatrix<f64>,
    rows: &DMatrix<f64>,
    composed: &DMatrix<f64>,
    kappa: &[f64],
    step: f64,
    tol: f64,
) -> bool {
    if step == 0.0 {
        return true;
    }
    let scale = 1.0 + b.norm();
    let scaled: Vec<f64> = kappa.iter().map(|k| k * step).collect();
    for j in 0..b.nrows() {
        let g: Vec<f64> = (0..b.ncols()).map(|l| b[(j, l)] - rows[(j, l)]).collect();
        let u: Vec<f64> = composed.row(j).iter().cloned().collect();
        if sorted_l1_dual(&g, &scaled) > 1.0 + tol {
            return false;
        }
        let pairing: f64 = g.iter().zip(&u).map(|(a, b)| a * b).sum();
        if (pairing - sorted_l1_norm(&u, &scaled)).abs() > tol * scale {
            return false;
        }
    }
    true
}

/// Prox of the sum of convex functions `f_1 + ... + f_m` from the proxes of
/// `m f_i` (parallel Dykstra-like splitting). Stops once successive iterates
/// differ by less than `tol` in Frobenius norm.
pub fn dykstra<F>(b: &DMatrix<f64>, proxes: &[F], tol: f64, max_iter: usize) -> Result<DMatrix<f64>>
where
    F: Fn(&DMatrix<f64>) -> DMatrix<f64>,
{
    dykstra_parts(b, proxes, tol, max_iter).map(|(x, _)| x)
}

/// Dykstra iterate together with the last output of every prox.
fn dykstra_parts<F>(
    b: &DMatrix<f64>,
    proxes: &[F],
    tol: f64,
    max_iter: usize,
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)>
where
    F: Fn(&DMatrix<f64>) -> DMatrix<f64>,
{
    let m = proxes.len();
    if m == 0 {
        return Ok((b.clone(), Vec::new()));
    }
    let mut x = b.clone();
    let mut z = vec![b.clone(); m];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let p: Vec<DMatrix<f64>> = proxes.iter().zip(&z).map(|(prox, zi)| prox(zi)).collect();
        let mut next = DMatrix::zeros(b.nrows(), b.ncols());
        for pi in &p {
            next += pi;
        }
        next /= m as f64;
        for (zi, pi) in z.iter_mut().zip(&p) {
            *zi += &next - pi;
        }
        residual = (&next - &x).norm();
        x = next;
        if residual < tol {
            return Ok((x, p));
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual,
    })
}

/// Dykstra evaluation of the sparse group Slope prox, optionally restricted
/// to the subspace `B 1 = 0`.
pub fn prox_sparse_group_slope_dykstra(
    b: &DMatrix<f64>,
    lambda: &[f64],
    kappa: &[f64],
    step: f64,
    tol: f64,
    centered: bool,
) -> Result<DMatrix<f64>> {
    check_args(b, lambda, kappa, step)?;
    check_tol(tol)?;
    type Prox<'a> = Box<dyn Fn(&DMatrix<f64>) -> DMatrix<f64> + 'a>;
    let proxes: Vec<Prox> = if centered {
        // the unconstrained prox is exact by composition; pair it with the projection
        vec![
            Box::new(|z| compose(z, lambda, kappa, 2.0 * step)),
            Box::new(center_rows_unchecked),
        ]
    } else {
        vec![
            Box::new(|z| prox_rows(z, kappa, 2.0 * step)),
            Box::new(|z| prox_group_slope_unchecked(z, lambda, 2.0 * step)),
        ]
    };
    dykstra(b, &proxes, tol, DYKSTRA_MAX_ITER)
}

fn check_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("tolerance must be positive, got {tol}")))
    }
}

/// Exact prox of `step * (sum_j lambda_j |B|_(j) + sum_j sum_l kappa_l |B|_j(l))`.
pub fn prox_sparse_group_slope(
    b: &DMatrix<f64>,
    lambda: &[f64],
    kappa: &[f64],
    step: f64,
    tol: f64,
) -> Result<DMatrix<f64>> {
    check_args(b, lambda, kappa, step)?;
    check_tol(tol)?;
    let rows = prox_rows(b, kappa, step);
    let composed = prox_group_slope_unchecked(&rows, lambda, step);
    if composition_is_optimal(b, &rows, &composed, kappa, step, tol) {
        return Ok(composed);
    }
    prox_sparse_group_slope_dykstra(b, lambda, kappa, step, tol, false)
}

/// Sparse group Slope prox restricted to `B 1 = 0`.
///
/// The constrained prox at `B` equals the constrained prox at the centered
/// `B`; when the unconstrained prox of the centered input already has zero
/// row sums it is the answer. Otherwise the Dykstra splitting is run and the
/// centered output of its penalty stage is returned, which keeps rows that
/// the penalty sets to zero exactly zero.
pub fn prox_sparse_group_slope_centered(
    b: &DMatrix<f64>,
    lambda: &[f64],
    kappa: &[f64],
    step: f64,
    tol: f64,
) -> Result<DMatrix<f64>> {
    check_args(b, lambda, kappa, step)?;
    check_tol(tol)?;
    let centered = center_rows_unchecked(b);
    let free = prox_sparse_group_slope(&centered, lambda, kappa, step, tol)?;
    if max_abs_row_sum(&free) <= 1e-12 * (1.0 + free.norm()) {
        return Ok(center_rows_unchecked(&free));
    }
    let proxes: [Box<dyn Fn(&DMatrix<f64>) -> DMatrix<f64> + '_>; 2] = [
        Box::new(|z| compose(z, lambda, kappa, 2.0 * step)),
        Box::new(center_rows_unchecked),
    ];
    let (_, parts) = dykstra_parts(&centered, &proxes, tol, DYKSTRA_MAX_ITER)?;
    Ok(center_rows_unchecked(&parts[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soft(v: f64, t: f64) -> f64 {
        v.signum() * (v.abs() - t).max(0.0)
    }

    #[test]
    fn zero_maps_to_zero() {
        let z = DMatrix::zeros(3, 3);
        let out = prox_sparse_group_slope(&z, &[0.3, 0.2, 0.1], &[0.3, 0.2, 0.1], 1.0, 1e-9).unwrap();
        assert_eq!(out, z);
    }

    #[test]
    fn lasso_case_matches_closed_form() {
        let b = DMatrix::from_row_slice(2, 3, &[1.0, -0.2, 0.5, 0.1, 0.05, -0.3]);
        let (lam, kap, step) = (0.2, 0.15, 1.0);
        let mut expected = b.map(|v| soft(v, step * kap));
        for mut row in expected.row_iter_mut() {
            let nrm = row.norm();
            let f = if nrm > step * lam { (nrm - step * lam) / nrm } else { 0.0 };
            row *= f;
        }
        let fast = prox_sparse_group_slope(&b, &[lam; 2], &[kap; 3], step, 1e-12).unwrap();
        let slow = prox_sparse_group_slope_dykstra(&b, &[lam; 2], &[kap; 3], step, 1e-13, false).unwrap();
        assert!((&fast - &expected).amax() < 1e-14);
        assert!((&slow - &expected).amax() < 1e-8, "{}", (&slow - &expected).amax());
    }

    #[test]
    fn centered_prox_has_zero_row_sums() {
        let b = DMatrix::from_row_slice(2, 3, &[1.0, -0.2, 0.9, 0.4, 0.05, -0.3]);
        let out = prox_sparse_group_slope_centered(&b, &[0.2, 0.1], &[0.1, 0.05, 0.02], 1.0, 1e-12).unwrap();
        for r in out.row_iter() {
            assert!(r.sum().abs() < 1e-9);
        }
    }

    #[test]
    fn dykstra_reports_non_convergence() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, -0.2, 0.9, 0.4]);
        let proxes: [Box<dyn Fn(&DMatrix<f64>) -> DMatrix<f64>>; 2] = [
            Box::new(|z| prox_rows(z, &[0.2, 0.1], 2.0)),
            Box::new(|z| prox_group_slope_unchecked(z, &[0.3, 0.1], 2.0)),
        ];
        assert!(matches!(dykstra(&b, &proxes, 1e-30, 3), Err(Error::Convergence { iterations: 3, .. })));
    }
}
