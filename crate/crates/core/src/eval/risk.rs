//! Misclassification, excess and Kullback-Leibler risks against a known truth.

use nalgebra::DMatrix;
use serde::Serialize;

use super::synthetic::{draw_labels, streams, FeatureSampler, SyntheticSpec};
use crate::data::{CoefficientMatrix, Dataset};
use crate::error::{Error, Result};
use crate::model::{argmax_first, class_probs_matrix, kl_divergence, predict_matrix};
use crate::rng::rng_stream;

/// Margin levels `h = k / 200`, `k = 1..=200`.
pub fn default_margin_grid() -> Vec<f64> {
    (1..=200).map(|k| k as f64 / 200.0).collect()
}

/// Monte-Carlo Bayes risk `E[1 - max_l p_l(X)]` under the truth with its
/// binomial-style standard error `sqrt(r (1 - r) / m)`.
pub fn estimate_bayes_risk(b_true: &CoefficientMatrix, spec: &SyntheticSpec, mc_samples: usize) -> Result<(f64, f64)> {
    if mc_samples == 0 {
        return Err(Error::invalid("mc_samples must be positive"));
    }
    check_truth(b_true, spec)?;
    let sampler = FeatureSampler::new(&spec.feature_law, spec.d)?;
    let x = sampler.sample(mc_samples, &mut rng_stream(spec.seed, streams::BAYES_FEATURES));
    let probs = class_probs_matrix(b_true.values(), &x)?;
    let r = probs.row_iter().map(|p| 1.0 - p.max()).sum::<f64>() / mc_samples as f64;
    Ok((r, binomial_se(r, mc_samples)))
}

fn binomial_se(r: f64, m: usize) -> f64 {
    (r * (1.0 - r) / m as f64).max(0.0).sqrt()
}

fn check_truth(b: &CoefficientMatrix, spec: &SyntheticSpec) -> Result<()> {
    Error::check_dim("coefficient rows", spec.d, b.d())?;
    Error::check_dim("coefficient columns", spec.num_classes, b.num_classes())
}

/// Empirical CDF `P(gap(X) <= h)` of the gap between the two largest class
/// probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginReport {
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
    /// Least-squares slope of `ln cdf` on `ln h` over the decade starting at
    /// the smallest grid level, when at least two levels have positive mass.
    pub fitted_alpha: Option<f64>,
}

/// Gap `p_(1) - p_(2)` at each row of `x`.
pub fn margin_gaps(b: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let probs = class_probs_matrix(b, x)?;
    Ok(probs
        .row_iter()
        .map(|p| {
            let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for &v in p.iter() {
                if v > first {
                    second = first;
                    first = v;
                } else if v > second {
                    second = v;
                }
            }
            first - second
        })
        .collect())
}

pub fn margin_report(b_true: &DMatrix<f64>, x: &DMatrix<f64>, grid: &[f64]) -> Result<MarginReport> {
    if x.nrows() == 0 {
        return Err(Error::invalid("margin report needs at least one sample point"));
    }
    if grid.is_empty() || grid.iter().any(|h| !(h.is_finite() && *h > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("margin grid must be positive and strictly increasing"));
    }
    let mut gaps = margin_gaps(b_true, x)?;
    gaps.sort_by(f64::total_cmp);
    let m = gaps.len() as f64;
    let cdf: Vec<f64> = grid
        .iter()
        .map(|h| gaps.partition_point(|g| g <= h) as f64 / m)
        .collect();

    let h_min = grid[0];
    let points: Vec<(f64, f64)> = grid
        .iter()
        .zip(&cdf)
        .filter(|(h, c)| **h <= 10.0 * h_min * (1.0 + 1e-12) && **c > 0.0)
        .map(|(h, c)| (h.ln(), c.ln()))
        .collect();
    let fitted_alpha = least_squares_slope(&points);
    Ok(MarginReport {
        grid: grid.to_vec(),
        cdf,
        fitted_alpha,
    })
}

/// Slope of the least-squares line through `points`; `None` with fewer than
/// two distinct abscissae.
pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub train_error: f64,
    pub test_error: f64,
    pub test_error_se: f64,
    pub bayes_risk: f64,
    pub bayes_risk_se: f64,
    /// `E[p_max(X) - p_{eta_hat(X)}(X)]` under the truth, averaged over the test features.
    pub excess_risk: f64,
    pub excess_risk_se: f64,
    /// `d_KL(f_true, f_hat)` averaged over the test features.
    pub kl_risk: f64,
    pub margin: MarginReport,
}

/// Risks of `b_hat` on a fresh test sample drawn from the generating model.
///
/// Test features and labels use dedicated streams of `spec.seed`, so fits
/// of different penalties on the same replicate share the test sample.
/// The excess risk averages the conditional excess `p_max - p_{yhat}`,
/// which has far lower variance than `test_error - bayes_risk` and is zero
/// exactly when the plug-in classifier agrees with the Bayes rule.
pub fn risk_report(
    b_hat: &CoefficientMatrix,
    b_true: &CoefficientMatrix,
    spec: &SyntheticSpec,
    train: &Dataset,
    test_size: usize,
    mc_samples: usize,
) -> Result<RiskReport> {
    if test_size == 0 {
        return Err(Error::invalid("test_size must be positive"));
    }
    check_truth(b_true, spec)?;
    check_truth(b_hat, spec)?;
    Error::check_dim("training features", spec.d, train.d())?;

    let train_pred = predict_matrix(b_hat.values(), train.features())?;
    let train_error = error_rate(&train_pred, train.labels());

    let sampler = FeatureSampler::new(&spec.feature_law, spec.d)?;
    let x_test = sampler.sample(test_size, &mut rng_stream(spec.seed, streams::TEST_FEATURES));
    let y_test = draw_labels(b_true.values(), &x_test, &mut rng_stream(spec.seed, streams::TEST_LABELS))?;
    let pred = predict_matrix(b_hat.values(), &x_test)?;
    let test_error = error_rate(&pred, &y_test);

    let probs = class_probs_matrix(b_true.values(), &x_test)?;
    let excess: Vec<f64> = probs
        .row_iter()
        .zip(&pred)
        .map(|(p, &k)| p[argmax_first(p.iter().cloned())] - p[k])
        .collect();
    let (excess_risk, excess_risk_se) = mean_and_se(&excess);

    let (bayes_risk, bayes_risk_se) = estimate_bayes_risk(b_true, spec, mc_samples)?;
    let kl_risk = kl_divergence(b_true.values(), b_hat.values(), &x_test)?;
    let margin = margin_report(b_true.values(), &x_test, &default_margin_grid())?;

    Ok(RiskReport {
        train_error,
        test_error,
        test_error_se: binomial_se(test_error, test_size),
        bayes_risk,
        bayes_risk_se,
        excess_risk,
        excess_risk_se,
        kl_risk,
        margin,
    })
}

fn error_rate(pred: &[usize], labels: &[usize]) -> f64 {
    pred.iter().zip(labels).filter(|(p, y)| p != y).count() as f64 / labels.len().max(1) as f64
}

/// Sample mean and its standard error (`sd / sqrt(m)`).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}
