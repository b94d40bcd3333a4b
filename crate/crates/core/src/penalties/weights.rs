//! Weight sequences generated from the sample size and problem dimensions.
//!
//! The leading constants default to 1. The values appearing in the risk
//! bounds are proof artifacts and far too conservative for practical use.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::second_moments;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightConfig {
    /// Group Slope weights are divided by `c0`.
    pub c0: f64,
    /// Multiplier of the row weights of sparse group Slope.
    pub c1: f64,
    /// Multiplier of the within-row weights of sparse group Slope.
    pub c2: f64,
    /// Multiplier of the nuclear-norm weight.
    pub c_nuclear: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            c0: 1.0,
            c1: 1.0,
            c2: 1.0,
            c_nuclear: 1.0,
        }
    }
}

impl WeightConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2), ("c_nuclear", self.c_nuclear)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and positive, got {v}")));
            }
        }
        Ok(())
    }
}

fn check_sizes(d: usize, num_classes: usize, n: usize) -> Result<()> {
    if d == 0 || num_classes == 0 || n == 0 {
        return Err(Error::invalid(format!(
            "weights need d, L, n >= 1 (got d={d}, L={num_classes}, n={n})"
        )));
    }
    Ok(())
}

/// `lambda_j = (1/c0) sqrt((L + ln(d/j)) / n)`, `j = 1..d`.
pub fn group_slope_weights(d: usize, num_classes: usize, n: usize, cfg: &WeightConfig) -> Result<Vec<f64>> {
    check_sizes(d, num_classes, n)?;
    cfg.validate()?;
    let (l, n, d) = (num_classes as f64, n as f64, d as f64);
    Ok((1..=d as usize)
        .map(|j| ((l + (d / j as f64).ln()) / n).sqrt() / cfg.c0)
        .collect())
}

/// `lambda_j = c1 sqrt(ln(d e / j) / n)` and `kappa_l = c2 sqrt(ln(L e / l) / n)`.
pub fn sparse_group_slope_weights(
    d: usize,
    num_classes: usize,
    n: usize,
    cfg: &WeightConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_sizes(d, num_classes, n)?;
    cfg.validate()?;
    let n = n as f64;
    let seq = |k: usize, c: f64| -> Vec<f64> {
        (1..=k)
            .map(|j| c * ((k as f64 / j as f64).ln() + 1.0).sqrt() / n.sqrt())
            .collect()
    };
    Ok((seq(d, cfg.c1), seq(num_classes, cfg.c2)))
}

/// Constant group Lasso weight `(1/c0) sqrt((L + ln d) / n)`.
pub fn group_lasso_weight(d: usize, num_classes: usize, n: usize, cfg: &WeightConfig) -> Result<f64> {
    check_sizes(d, num_classes, n)?;
    cfg.validate()?;
    Ok(((num_classes as f64 + (d as f64).ln()) / n as f64).sqrt() / cfg.c0)
}

/// Constant sparse group Lasso weights `c1 sqrt(ln d / n)` and `c2 sqrt(ln L / n)`.
pub fn sparse_group_lasso_weights(
    d: usize,
    num_classes: usize,
    n: usize,
    cfg: &WeightConfig,
) -> Result<(f64, f64)> {
    check_sizes(d, num_classes, n)?;
    cfg.validate()?;
    if d < 2 {
        return Err(Error::invalid("sparse group Lasso weights need d >= 2 (ln d > 0)"));
    }
    let n = n as f64;
    Ok((
        cfg.c1 * ((d as f64).ln() / n).sqrt(),
        cfg.c2 * ((num_classes as f64).ln() / n).sqrt(),
    ))
}

/// `lambda = C (sqrt(tau_1) + sqrt(m ln d / n)) (sqrt(L - 1) + sqrt(d)) / sqrt(n)`
/// with the sample largest eigenvalue `tau_1` of `X^T X / n` and the sample
/// mean squared row norm `m`.
pub fn nuclear_lambda(data: &Dataset, num_classes: usize, cfg: &WeightConfig) -> Result<f64> {
    cfg.validate()?;
    if data.n() < 2 {
        return Err(Error::invalid("nuclear weight needs n >= 2"));
    }
    if num_classes < 1 {
        return Err(Error::invalid("nuclear weight needs L >= 1"));
    }
    let moments = second_moments(data.features())?;
    if !(moments.tau_1 > 0.0) {
        return Err(Error::invalid("features have a zero second-moment matrix"));
    }
    let (n, d, l) = (data.n() as f64, data.d() as f64, num_classes as f64);
    Ok(cfg.c_nuclear
        * (moments.tau_1.sqrt() + (moments.m_hat * d.ln() / n).sqrt())
        * ((l - 1.0).sqrt() + d.sqrt())
        / n.sqrt())
}
