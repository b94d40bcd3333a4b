//! Multinomial logistic regression primitives.
//!
//! `p_l(x) = exp(beta_l^T x) / sum_k exp(beta_k^T x)`. All log-sum-exp
//! evaluations subtract the row maximum first.

use nalgebra::{DMatrix, RowDVector};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Boundedness of the class probabilities: `delta <= p_l(x) <= 1 - delta`,
/// equivalently `|beta_l^T x| <= c_star = ln((1 - delta) / delta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelBounds {
    delta: f64,
    c_star: f64,
}

impl ModelBounds {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::invalid(format!("delta must lie in (0, 1/2), got {delta}")));
        }
        Ok(ModelBounds {
            delta,
            c_star: ((1.0 - delta) / delta).ln(),
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn c_star(&self) -> f64 {
        self.c_star
    }
}

fn check_features(b: &DMatrix<f64>, d: usize) -> Result<()> {
    Error::check_dim("number of features", b.nrows(), d)
}

fn softmax_in_place(row: &mut [f64]) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
    max + total.ln()
}

/// Class probabilities at one feature vector.
pub fn class_probs(b: &DMatrix<f64>, x: &[f64]) -> Result<Vec<f64>> {
    check_features(b, x.len())?;
    let mut scores: Vec<f64> = b.column_iter().map(|c| c.iter().zip(x).map(|(u, v)| u * v).sum()).collect();
    softmax_in_place(&mut scores);
    Ok(scores)
}

/// Row-wise class probabilities for every row of `x` (`m x d`), as `m x L`.
pub fn class_probs_matrix(b: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_features(b, x.ncols())?;
    let mut p = x * b;
    for i in 0..p.nrows() {
        let mut row: Vec<f64> = p.row(i).iter().cloned().collect();
        softmax_in_place(&mut row);
        p.set_row(i, &RowDVector::from_vec(row));
    }
    Ok(p)
}

/// Scores, probabilities and per-sample log-sum-exp in one pass.
fn probs_and_lse(b: &DMatrix<f64>, x: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let scores = x * b;
    let (n, l) = scores.shape();
    let mut probs = DMatrix::zeros(n, l);
    let mut lse = Vec::with_capacity(n);
    let mut buf = vec![0.0; l];
    for i in 0..n {
        for k in 0..l {
            buf[k] = scores[(i, k)];
        }
        lse.push(softmax_in_place(&mut buf));
        for k in 0..l {
            probs[(i, k)] = buf[k];
        }
    }
    (scores, probs, lse)
}

fn check_model(b: &DMatrix<f64>, data: &Dataset) -> Result<()> {
    check_features(b, data.d())?;
    Error::check_dim("number of classes", data.num_classes(), b.ncols())
}

/// Averaged negative log-likelihood `(1/n) sum_i [lse(B^T X_i) - X_i^T B xi_i]`.
pub fn nll(b: &DMatrix<f64>, data: &Dataset) -> Result<f64> {
    check_model(b, data)?;
    Ok(nll_unchecked(b, data))
}

pub(crate) fn nll_unchecked(b: &DMatrix<f64>, data: &Dataset) -> f64 {
    let scores = data.features() * b;
    let mut buf = vec![0.0; b.ncols()];
    let mut total = 0.0;
    for (i, &y) in data.labels().iter().enumerate() {
        for (k, v) in buf.iter_mut().enumerate() {
            *v = scores[(i, k)];
        }
        let picked = buf[y];
        total += softmax_in_place(&mut buf) - picked;
    }
    total / data.n() as f64
}

/// Gradient of [`nll`]: `(1/n) sum_i X_i (p(X_i) - xi_i)^T`, a `d x L` matrix.
pub fn grad_nll(b: &DMatrix<f64>, data: &Dataset) -> Result<DMatrix<f64>> {
    check_model(b, data)?;
    Ok(nll_and_grad_unchecked(b, data).1)
}

/// [`nll`] and [`grad_nll`] sharing one score evaluation.
pub fn nll_and_grad(b: &DMatrix<f64>, data: &Dataset) -> Result<(f64, DMatrix<f64>)> {
    check_model(b, data)?;
    Ok(nll_and_grad_unchecked(b, data))
}

pub(crate) fn nll_and_grad_unchecked(b: &DMatrix<f64>, data: &Dataset) -> (f64, DMatrix<f64>) {
    let n = data.n() as f64;
    let (scores, mut resid, lse) = probs_and_lse(b, data.features());
    let mut total = 0.0;
    for (i, &y) in data.labels().iter().enumerate() {
        total += lse[i] - scores[(i, y)];
        resid[(i, y)] -= 1.0;
    }
    let grad = data.features().tr_mul(&resid) / n;
    (total / n, grad)
}

/// Plug-in classifier `argmax_l beta_l^T x`, returning a 0-based class.
/// Ties go to the smallest class index.
pub fn predict(b: &DMatrix<f64>, x: &[f64]) -> Result<usize> {
    check_features(b, x.len())?;
    let scores = b.column_iter().map(|c| c.iter().zip(x).map(|(u, v)| u * v).sum::<f64>());
    Ok(argmax_first(scores))
}

/// [`predict`] for every row of `x`.
pub fn predict_matrix(b: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<Vec<usize>> {
    check_features(b, x.ncols())?;
    let scores = x * b;
    Ok(scores.row_iter().map(|r| argmax_first(r.iter().cloned())).collect())
}

pub(crate) fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (k, v) in values.enumerate() {
        if v > best_val {
            best = k;
            best_val = v;
        }
    }
    best
}

/// Monte-Carlo Kullback-Leibler divergence `d_KL(f_B1, f_B2)` over the rows of `x_sample`.
pub fn kl_divergence(b1: &DMatrix<f64>, b2: &DMatrix<f64>, x_sample: &DMatrix<f64>) -> Result<f64> {
    Error::check_dim("rows of the second matrix", b1.nrows(), b2.nrows())?;
    Error::check_dim("columns of the second matrix", b1.ncols(), b2.ncols())?;
    check_features(b1, x_sample.ncols())?;
    if x_sample.nrows() == 0 {
        return Err(Error::invalid("KL divergence needs at least one sample point"));
    }
    let (s1, _, lse1) = probs_and_lse(b1, x_sample);
    let (s2, _, lse2) = probs_and_lse(b2, x_sample);
    let mut total = 0.0;
    for i in 0..x_sample.nrows() {
        for l in 0..b1.ncols() {
            let log_p1 = s1[(i, l)] - lse1[i];
            let log_p2 = s2[(i, l)] - lse2[i];
            total += log_p1.exp() * (log_p1 - log_p2);
        }
    }
    Ok(total / x_sample.nrows() as f64)
}

/// `max_{i,l} |beta_l^T x_i|` over the rows of `x`.
pub fn max_abs_score(b: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<f64> {
    check_features(b, x.ncols())?;
    Ok((x * b).amax())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coefficients_give_uniform() {
        let b = DMatrix::zeros(3, 4);
        let p = class_probs(&b, &[0.3, -1.0, 2.0]).unwrap();
        for v in p {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn binary_three_to_one() {
        let h = 3f64.ln() / 2.0;
        let b = DMatrix::from_row_slice(1, 2, &[h, -h]);
        let p = class_probs(&b, &[1.0]).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-12);
        assert!((p[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariance_and_overflow() {
        let b = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let shifted = b.add_scalar(5.0);
        let p = class_probs(&b, &[1.0]).unwrap();
        let q = class_probs(&shifted, &[1.0]).unwrap();
        for (u, v) in p.iter().zip(&q) {
            assert!((u - v).abs() < 1e-15);
        }
        let huge = DMatrix::from_row_slice(1, 2, &[800.0, -800.0]);
        let p = class_probs(&huge, &[1.0]).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nll_at_zero_is_ln_l() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
        let ds = Dataset::new(x, vec![0, 2, 1], 3).unwrap();
        let v = nll(&DMatrix::zeros(2, 3), &ds).unwrap();
        assert!((v - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn nll_single_sample() {
        let h = 3f64.ln() / 2.0;
        let b = DMatrix::from_row_slice(1, 2, &[h, -h]);
        let ds = Dataset::new(DMatrix::from_element(1, 1, 1.0), vec![0], 2).unwrap();
        assert!((nll(&b, &ds).unwrap() + 0.75f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_symmetric_point() {
        // balanced labels and zero column sums
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, -1.0, -2.0, 0.5, 1.0, -0.5, -1.0]);
        let ds = Dataset::new(x, vec![0, 0, 1, 1], 2).unwrap();
        let g = grad_nll(&DMatrix::zeros(2, 2), &ds).unwrap();
        assert!(g.amax() < 1e-15, "{g}");
    }

    #[test]
    fn dimension_mismatch_errors() {
        let b = DMatrix::zeros(2, 3);
        assert!(class_probs(&b, &[1.0]).is_err());
        assert!(predict(&b, &[1.0, 2.0, 3.0]).is_err());
        let ds = Dataset::new(DMatrix::zeros(2, 2), vec![0, 1], 2).unwrap();
        assert!(matches!(nll(&b, &ds), Err(Error::DimensionMismatch { .. })));
        assert!(kl_divergence(&b, &DMatrix::zeros(2, 2), &DMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn predict_ties_go_to_first_class() {
        assert_eq!(predict(&DMatrix::zeros(2, 4), &[1.0, -1.0]).unwrap(), 0);
        let b = DMatrix::from_row_slice(2, 3, &[0.0, 5.0, 0.0, 0.0, 5.0, 0.0]);
        assert_eq!(predict(&b, &[0.1, 2.0]).unwrap(), 1);
    }

    #[test]
    fn kl_closed_form_binary() {
        let h = 3f64.ln() / 2.0;
        let b2 = DMatrix::from_row_slice(1, 2, &[h, -h]);
        let x = DMatrix::from_element(5, 1, 1.0);
        let kl = kl_divergence(&DMatrix::zeros(1, 2), &b2, &x).unwrap();
        let expected = 0.5 * (0.5f64 / 0.75).ln() + 0.5 * (0.5f64 / 0.25).ln();
        assert!((kl - expected).abs() < 1e-14);
        assert!(kl_divergence(&b2, &b2, &x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn bounds_c_star() {
        let mb = ModelBounds::new(0.05).unwrap();
        assert!((mb.c_star() - 19f64.ln()).abs() < 1e-12);
        assert!(ModelBounds::new(0.5).is_err());
        assert!(ModelBounds::new(0.0).is_err());
    }
}
