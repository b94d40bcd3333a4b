//! Synthetic samples with a known coefficient matrix.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::data::{center_rows_unchecked, CoefficientMatrix, Dataset};
use crate::error::{Error, Result};
use crate::model::{class_probs_matrix, max_abs_score, ModelBounds};
use crate::rng::{rng_stream, RngStream};

/// Stream ids used under one [`SyntheticSpec::seed`].
pub mod streams {
    pub const COEFFICIENTS: u64 = 0;
    pub const FEATURES: u64 = 1;
    pub const LABELS: u64 = 2;
    pub const TEST_FEATURES: u64 = 3;
    pub const TEST_LABELS: u64 = 4;
    pub const BAYES_FEATURES: u64 = 5;
}

/// Sparsity structure of the true coefficient matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Structure {
    /// `d0` non-zero rows.
    GlobalRowSparse { d0: usize },
    /// `d0` non-zero rows, row `j` of them with `m[j]` non-zero entries.
    DoubleRowSparse { d0: usize, m: Vec<usize> },
    /// Rank `r0`.
    LowRank { r0: usize },
}

impl Structure {
    pub fn name(&self) -> &'static str {
        match self {
            Structure::GlobalRowSparse { .. } => "global-row-sparse",
            Structure::DoubleRowSparse { .. } => "double-row-sparse",
            Structure::LowRank { .. } => "low-rank",
        }
    }

    /// `d0` for the row-sparse structures, `r0` for low rank.
    pub fn size(&self) -> usize {
        match self {
            Structure::GlobalRowSparse { d0 } | Structure::DoubleRowSparse { d0, .. } => *d0,
            Structure::LowRank { r0 } => *r0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Covariance {
    Identity,
    /// `Sigma_jk = rho^|j - k|`.
    Toeplitz { rho: f64 },
    /// Explicit `d x d` matrix, row by row.
    Full { matrix: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FeatureLaw {
    Gaussian { covariance: Covariance },
    /// Independent signs.
    Rademacher,
    /// Independent Student t with `dof` degrees of freedom, scaled to unit
    /// variance when `dof > 2`.
    StudentT { dof: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "L")]
    pub num_classes: usize,
    pub structure: Structure,
    pub signal_scale: f64,
    pub delta: f64,
    pub feature_law: FeatureLaw,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let (n, d, l) = (self.n, self.d, self.num_classes);
        if n == 0 || d == 0 {
            return Err(Error::invalid(format!("need n >= 1 and d >= 1, got n={n}, d={d}")));
        }
        if l < 2 {
            return Err(Error::invalid(format!("need L >= 2, got {l}")));
        }
        match &self.structure {
            Structure::GlobalRowSparse { d0 } => check_d0(*d0, d, n)?,
            Structure::DoubleRowSparse { d0, m } => {
                check_d0(*d0, d, n)?;
                if m.len() != *d0 {
                    return Err(Error::invalid(format!(
                        "m must list one row sparsity per non-zero row ({d0}), got {}",
                        m.len()
                    )));
                }
                if let Some(&mj) = m.iter().find(|&&mj| mj < 2 || mj > l) {
                    return Err(Error::invalid(format!(
                        "row sparsity m_j = {mj} outside 2..={l} (a centered row needs two non-zeros)"
                    )));
                }
            }
            Structure::LowRank { r0 } => {
                if *r0 == 0 || *r0 > (l - 1).min(d) {
                    return Err(Error::invalid(format!(
                        "rank r0 = {r0} outside 1..={}",
                        (l - 1).min(d)
                    )));
                }
            }
        }
        if !(self.signal_scale.is_finite() && self.signal_scale >= 0.0) {
            return Err(Error::invalid("signal_scale must be finite and nonnegative"));
        }
        ModelBounds::new(self.delta)?;
        FeatureSampler::new(&self.feature_law, d).map(|_| ())
    }
}

fn check_d0(d0: usize, d: usize, n: usize) -> Result<()> {
    if d0 == 0 || d0 > d.min(n) {
        return Err(Error::invalid(format!(
            "d0 = {d0} outside 1..={} (min of d = {d} and n = {n})",
            d.min(n)
        )));
    }
    Ok(())
}

/// Draws feature rows from a [`FeatureLaw`].
#[derive(Debug, Clone)]
pub struct FeatureSampler {
    law: FeatureLaw,
    d: usize,
    factor: Option<DMatrix<f64>>,
}

impl FeatureSampler {
    pub fn new(law: &FeatureLaw, d: usize) -> Result<Self> {
        let factor = match law {
            FeatureLaw::Gaussian { covariance } => match covariance {
                Covariance::Identity => None,
                Covariance::Toeplitz { rho } => {
                    if !(rho.abs() < 1.0) {
                        return Err(Error::invalid(format!("Toeplitz rho must lie in (-1, 1), got {rho}")));
                    }
                    let sigma = DMatrix::from_fn(d, d, |j, k| rho.powi((j as i32 - k as i32).abs()));
                    Some(cholesky(sigma)?)
                }
                Covariance::Full { matrix } => {
                    if matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
                        return Err(Error::invalid(format!("covariance must be {d} x {d}")));
                    }
                    let sigma = DMatrix::from_fn(d, d, |j, k| matrix[j][k]);
                    if (&sigma - sigma.transpose()).amax() > 1e-12 {
                        return Err(Error::invalid("covariance must be symmetric"));
                    }
                    Some(cholesky(sigma)?)
                }
            },
            FeatureLaw::Rademacher => None,
            FeatureLaw::StudentT { dof } => {
                if !(dof.is_finite() && *dof > 0.0) {
                    return Err(Error::invalid(format!("Student t needs dof > 0, got {dof}")));
                }
                None
            }
        };
        Ok(FeatureSampler {
            law: law.clone(),
            d,
            factor,
        })
    }

    /// `m x d` matrix of independent rows.
    pub fn sample(&self, m: usize, rng: &mut RngStream) -> DMatrix<f64> {
        let d = self.d;
        match &self.law {
            FeatureLaw::Gaussian { .. } => {
                let z = DMatrix::from_fn(m, d, |_, _| StandardNormal.sample(rng));
                match &self.factor {
                    Some(chol) => z * chol.transpose(),
                    None => z,
                }
            }
            FeatureLaw::Rademacher => {
                DMatrix::from_fn(m, d, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
            }
            FeatureLaw::StudentT { dof } => {
                let t = StudentT::new(*dof).expect("dof validated");
                let scale = if *dof > 2.0 { ((dof - 2.0) / dof).sqrt() } else { 1.0 };
                DMatrix::from_fn(m, d, |_, _| t.sample(rng) * scale)
            }
        }
    }
}

fn cholesky(sigma: DMatrix<f64>) -> Result<DMatrix<f64>> {
    sigma
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::invalid("covariance matrix is not positive definite"))
}

fn normal_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Unscaled centered coefficient matrix with the requested structure.
fn draw_structure(spec: &SyntheticSpec, rng: &mut RngStream) -> DMatrix<f64> {
    let (d, l) = (spec.d, spec.num_classes);
    let mut b = DMatrix::zeros(d, l);
    match &spec.structure {
        Structure::GlobalRowSparse { d0 } => {
            let mut rows = sample(rng, d, *d0).into_vec();
            rows.sort_unstable();
            for j in rows {
                for k in 0..l {
                    b[(j, k)] = StandardNormal.sample(rng);
                }
            }
            b = center_rows_unchecked(&b);
        }
        Structure::DoubleRowSparse { d0, m } => {
            let mut rows = sample(rng, d, *d0).into_vec();
            rows.sort_unstable();
            for (j, &mj) in rows.into_iter().zip(m) {
                let mut cols = sample(rng, l, mj).into_vec();
                cols.sort_unstable();
                let vals: Vec<f64> = (0..mj).map(|_| StandardNormal.sample(rng)).collect();
                let mean = vals.iter().sum::<f64>() / mj as f64;
                for (k, v) in cols.into_iter().zip(vals) {
                    b[(j, k)] = v - mean;
                }
            }
        }
        Structure::LowRank { r0 } => {
            let u = normal_matrix(d, *r0, rng);
            let v = normal_matrix(*r0, l, rng);
            b = center_rows_unchecked(&(u * v));
        }
    }
    b
}

/// Draws `(sample, true coefficients)`.
///
/// The structured matrix is multiplied by `signal_scale`, then shrunk
/// globally if needed so that `max_{i,l} |beta_l^T X_i| <= ln((1-delta)/delta)`
/// on the realized sample. Labels are drawn from the model probabilities.
pub fn generate(spec: &SyntheticSpec) -> Result<(Dataset, CoefficientMatrix)> {
    spec.validate()?;
    let bounds = ModelBounds::new(spec.delta)?;
    let sampler = FeatureSampler::new(&spec.feature_law, spec.d)?;

    let mut b = draw_structure(spec, &mut rng_stream(spec.seed, streams::COEFFICIENTS)) * spec.signal_scale;
    let x = sampler.sample(spec.n, &mut rng_stream(spec.seed, streams::FEATURES));
    let largest = max_abs_score(&b, &x)?;
    if largest > bounds.c_star() {
        b *= bounds.c_star() / largest;
        // one ulp of slack can remain after the division
        while max_abs_score(&b, &x)? > bounds.c_star() {
            b *= 1.0 - 1e-15;
        }
    }

    let labels = draw_labels(&b, &x, &mut rng_stream(spec.seed, streams::LABELS))?;
    let data = Dataset::new(x, labels, spec.num_classes)?;
    let truth = CoefficientMatrix::new_centered(b)?;
    Ok((data, truth))
}

/// Draws one label per row of `x` from the multinomial model.
pub fn draw_labels(b: &DMatrix<f64>, x: &DMatrix<f64>, rng: &mut RngStream) -> Result<Vec<usize>> {
    let probs = class_probs_matrix(b, x)?;
    Ok(probs
        .row_iter()
        .map(|p| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, pk) in p.iter().enumerate() {
                acc += pk;
                if u < acc {
                    return k;
                }
            }
            p.len() - 1
        })
        .collect())
}
