//! Exhaustive search for the complexity-penalized estimator at tiny `d`.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::fista::{finish, fista, FitResult, Problem, SolverConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::penalties::ProxOptions;

/// Largest number of features the enumeration accepts.
pub const MAX_EXHAUSTIVE_FEATURES: usize = 15;

/// `Pen(r) = c1 r (L - 1) + c2 r ln(d e / r)`, with `Pen(0) = 0`.
pub fn complexity_penalty(r: usize, d: usize, num_classes: usize, c1: f64, c2: f64) -> f64 {
    if r == 0 {
        return 0.0;
    }
    let r_f = r as f64;
    c1 * r_f * (num_classes as f64 - 1.0) + c2 * r_f * ((d as f64 / r_f).ln() + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveResult {
    /// Restricted MLE on the selected support, embedded in the full `d x L` matrix.
    pub fit: FitResult,
    /// Selected feature indices (0-based, increasing).
    pub support: Vec<usize>,
    /// `-loglik(B_S) + Pen(|S|)` of the selected support.
    pub criterion: f64,
    /// Number of supports evaluated.
    pub supports_evaluated: usize,
    /// Whether every restricted fit converged.
    pub all_converged: bool,
}

/// All subsets of `0..d` with at most `max_size` elements, ordered by size
/// and then lexicographically.
pub fn enumerate_supports(d: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for size in 1..=max_size.min(d) {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            out.push(combo.clone());
            let mut i = size;
            while i > 0 && combo[i - 1] == d - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            combo[i - 1] += 1;
            for k in i..size {
                combo[k] = combo[k - 1] + 1;
            }
        }
    }
    out
}

struct Candidate {
    support: Vec<usize>,
    criterion: f64,
    fit: FitResult,
}

fn restricted_fit(data: &Dataset, support: &[usize], cfg: &SolverConfig) -> Result<FitResult> {
    let (d, l) = (data.d(), data.num_classes());
    if support.is_empty() {
        let ln_l = (l as f64).ln();
        return Ok(FitResult {
            coefficients: crate::data::CoefficientMatrix::zeros(d, l),
            objective_trace: vec![ln_l],
            iterations: 0,
            converged: true,
            fixed_point_residual: 0.0,
            step_size: 0.0,
            pre_centering_row_mean: 0.0,
        });
    }
    let sub = data.select_features(support)?;
    let problem = Problem {
        data: &sub,
        penalty: None,
        prox_opts: ProxOptions::default(),
    };
    let raw = fista(&problem, cfg)?;
    let small = finish(&problem, raw, true)?;
    let mut full = DMatrix::zeros(d, l);
    for (row, &j) in support.iter().enumerate() {
        full.set_row(j, &small.coefficients.values().row(row));
    }
    Ok(FitResult {
        coefficients: crate::data::CoefficientMatrix::new_centered(full)?,
        ..small
    })
}

/// Enumerates every row support of size at most `max_support`, fits the
/// unpenalized MLE restricted to it and returns the support minimizing
/// `-loglik(B_S) + Pen(|S|)`.
///
/// Supports are fitted in parallel; ties in the criterion go to the
/// lexicographically smallest support, so the result does not depend on
/// scheduling.
pub fn fit_exhaustive_complexity(
    data: &Dataset,
    c1: f64,
    c2: f64,
    max_support: usize,
    cfg: &SolverConfig,
) -> Result<ExhaustiveResult> {
    let d = data.d();
    if d > MAX_EXHAUSTIVE_FEATURES {
        return Err(Error::invalid(format!(
            "exhaustive search is limited to d <= {MAX_EXHAUSTIVE_FEATURES}, got d = {d}"
        )));
    }
    if max_support > d {
        return Err(Error::invalid(format!("max_support {max_support} exceeds d = {d}")));
    }
    if !(c1 >= 0.0 && c2 >= 0.0 && c1.is_finite() && c2.is_finite()) {
        return Err(Error::invalid("complexity constants must be finite and nonnegative"));
    }
    cfg.validate()?;
    let n = data.n() as f64;
    let supports = enumerate_supports(d, max_support);
    let evaluated = supports.len();
    let candidates = supports
        .into_par_iter()
        .map(|support| {
            let fit = restricted_fit(data, &support, cfg)?;
            let nll = crate::model::nll_unchecked(fit.coefficients.values(), data);
            let criterion = n * nll + complexity_penalty(support.len(), d, data.num_classes(), c1, c2);
            Ok(Candidate {
                support,
                criterion,
                fit,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let all_converged = candidates.iter().all(|c| c.fit.converged);
    let best = candidates
        .into_iter()
        .min_by(|a, b| match a.criterion.total_cmp(&b.criterion) {
            Ordering::Equal => a.support.cmp(&b.support),
            other => other,
        })
        .expect("the empty support is always evaluated");
    Ok(ExhaustiveResult {
        fit: best.fit,
        support: best.support,
        criterion: best.criterion,
        supports_evaluated: evaluated,
        all_converged,
    })
}
