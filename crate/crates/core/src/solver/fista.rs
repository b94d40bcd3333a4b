use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{center_rows_unchecked, max_abs_row_mean, CoefficientMatrix, Dataset};
use crate::error::{Error, Result};
use crate::model::{nll_and_grad_unchecked, nll_unchecked};
use crate::penalties::{penalty_value_unchecked, prox, ProxOptions};
use crate::penalty_spec::PenaltySpec;

/// Initial step of the line search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSize {
    /// `1 / lambda_max(X^T X / n)`, estimated with [`POWER_ITERATIONS`] power iterations.
    Auto,
    Fixed(f64),
}

pub const POWER_ITERATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Convergence threshold on the prox-gradient fixed-point residual,
    /// relative to `1 + |B|_F`.
    pub grad_map_tol: f64,
    pub backtrack_factor: f64,
    pub initial_step: StepSize,
    /// Return coefficients with `B 1 = 0`. Group Slope and nuclear fits are
    /// centered after solving; sparse group Slope carries the constraint
    /// inside its prox.
    pub enforce_centering: bool,
    /// Tolerance of inner Dykstra loops.
    pub prox_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iter: 5000,
            grad_map_tol: 1e-7,
            backtrack_factor: 0.5,
            initial_step: StepSize::Auto,
            enforce_centering: true,
            prox_tol: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be positive"));
        }
        if !(self.grad_map_tol.is_finite() && self.grad_map_tol > 0.0) {
            return Err(Error::invalid("grad_map_tol must be positive"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::invalid("backtrack_factor must lie in (0, 1)"));
        }
        if let StepSize::Fixed(t) = self.initial_step {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::invalid("initial step must be positive"));
            }
        }
        if !(self.prox_tol.is_finite() && self.prox_tol > 0.0) {
            return Err(Error::invalid("prox_tol must be positive"));
        }
        Ok(())
    }
}

/// Outcome of a penalized fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub coefficients: CoefficientMatrix,
    /// Objective after every accepted iterate, starting with the value at `B = 0`.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `|B - prox_t(B - t grad)|_F / t` at the final iterate.
    pub fixed_point_residual: f64,
    /// Step size in use when the solver stopped.
    pub step_size: f64,
    /// Largest `|row mean|` of the solver iterate before any explicit centering.
    pub pre_centering_row_mean: f64,
}

impl FitResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace starts with the initial objective")
    }
}

/// Largest eigenvalue of `X^T X / n` by power iteration from the all-ones vector.
pub fn gram_spectral_estimate(x: &DMatrix<f64>, iterations: usize) -> f64 {
    let (n, d) = x.shape();
    let mut v = DVector::from_element(d, 1.0 / (d as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let w = x.tr_mul(&(x * &v)) / n as f64;
        estimate = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
    }
    estimate
}

pub(crate) struct Problem<'a> {
    pub data: &'a Dataset,
    pub penalty: Option<&'a PenaltySpec>,
    pub prox_opts: ProxOptions,
}

impl Problem<'_> {
    fn penalty(&self, b: &DMatrix<f64>) -> f64 {
        self.penalty.map_or(0.0, |p| penalty_value_unchecked(p, b))
    }

    fn prox(&self, b: &DMatrix<f64>, step: f64) -> Result<DMatrix<f64>> {
        match self.penalty {
            Some(p) => prox(p, b, step, &self.prox_opts),
            None => Ok(b.clone()),
        }
    }
}

pub(crate) struct RawFit {
    pub coefficients: DMatrix<f64>,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub step: f64,
}

/// FISTA with backtracking and objective-based restart, started at `B = 0`.
///
/// An iterate whose objective exceeds the previous one by more than
/// [`objective_slack`] is discarded, the momentum is reset and the step is
/// retaken from the last accepted point, so the recorded objective never
/// increases beyond rounding.
pub(crate) fn fista(problem: &Problem, cfg: &SolverConfig) -> Result<RawFit> {
    let data = problem.data;
    let (d, l) = (data.d(), data.num_classes());
    let mut step = match cfg.initial_step {
        StepSize::Fixed(t) => t,
        StepSize::Auto => {
            let top = gram_spectral_estimate(data.features(), POWER_ITERATIONS);
            if top > 0.0 {
                1.0 / top
            } else {
                1.0
            }
        }
    };

    let mut x = DMatrix::zeros(d, l);
    let (mut f_x, mut g_x) = nll_and_grad_unchecked(&x, data);
    let mut obj_x = f_x + problem.penalty(&x);
    let mut y = x.clone();
    let (mut f_y, mut g_y) = (f_x, g_x.clone());
    let mut theta: f64 = 1.0;
    let mut trace = vec![obj_x];
    let mut residual = f64::INFINITY;
    let mut at_anchor = true;

    for iter in 1..=cfg.max_iter {
        let (candidate, f_cand) = loop {
            let cand = problem.prox(&(&y - &g_y * step), step)?;
            let f_cand = nll_unchecked(&cand, data);
            let diff = &cand - &y;
            let model = f_y + g_y.dot(&diff) + diff.norm_squared() / (2.0 * step);
            if f_cand <= model + 1e-12 * f_y.abs().max(1.0) {
                break (cand, f_cand);
            }
            step *= cfg.backtrack_factor;
            if step < 1e-300 {
                return Err(Error::Numeric("line search step underflow".into()));
            }
        };
        let obj_cand = f_cand + problem.penalty(&candidate);

        if obj_cand > obj_x + objective_slack(obj_x) {
            if at_anchor {
                // no decrease even from the accepted point: stagnation at rounding level
                return Ok(RawFit {
                    converged: residual_ok(residual * step, residual, &x, cfg),
                    coefficients: x,
                    trace,
                    iterations: iter,
                    residual,
                    step,
                });
            }
            theta = 1.0;
            y = x.clone();
            f_y = f_x;
            g_y = g_x.clone();
            at_anchor = true;
            continue;
        }

        let previous = std::mem::replace(&mut x, candidate);
        obj_x = obj_cand;
        debug_assert!(obj_x <= trace.last().unwrap() + objective_slack(*trace.last().unwrap()));
        trace.push(obj_x);
        let (fx, gx) = nll_and_grad_unchecked(&x, data);
        f_x = fx;
        g_x = gx;

        let fixed_point = problem.prox(&(&x - &g_x * step), step)?;
        let raw = (&x - &fixed_point).norm();
        residual = raw / step;
        if residual_ok(raw, residual, &x, cfg) {
            return Ok(RawFit {
                coefficients: x,
                trace,
                iterations: iter,
                converged: true,
                residual,
                step,
            });
        }

        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let momentum = (theta - 1.0) / theta_next;
        theta = theta_next;
        y = &x + (&x - &previous) * momentum;
        if momentum == 0.0 {
            f_y = f_x;
            g_y = g_x.clone();
            at_anchor = true;
        } else {
            let (fy, gy) = nll_and_grad_unchecked(&y, data);
            f_y = fy;
            g_y = gy;
            at_anchor = false;
        }
    }

    Ok(RawFit {
        coefficients: x,
        trace,
        iterations: cfg.max_iter,
        converged: false,
        residual,
        step,
    })
}

/// Rounding allowance when comparing objective values. Near the optimum the
/// true decrease of a step falls below the resolution of the computed
/// objective, and a strict comparison would stall the iteration.
pub const OBJECTIVE_SLACK_ULPS: f64 = 64.0;

pub fn objective_slack(value: f64) -> f64 {
    OBJECTIVE_SLACK_ULPS * f64::EPSILON * value.abs().max(1.0)
}

fn residual_ok(raw: f64, scaled: f64, x: &DMatrix<f64>, cfg: &SolverConfig) -> bool {
    let bound = cfg.grad_map_tol * (1.0 + x.norm());
    raw < bound && scaled < bound
}

/// Minimizes `nll(B) + pen(B)` by accelerated proximal gradient.
///
/// Non-convergence is reported through `converged = false`, not as an error.
pub fn fit(data: &Dataset, spec: &PenaltySpec, cfg: &SolverConfig) -> Result<FitResult> {
    spec.validate()?;
    spec.check_shape(data.d(), data.num_classes())?;
    cfg.validate()?;
    let constrained_prox = cfg.enforce_centering && matches!(spec, PenaltySpec::SparseGroupSlope { .. });
    let problem = Problem {
        data,
        penalty: Some(spec),
        prox_opts: ProxOptions {
            tol: cfg.prox_tol,
            centered: constrained_prox,
        },
    };
    let raw = fista(&problem, cfg)?;
    finish(&problem, raw, cfg.enforce_centering)
}

pub(crate) fn finish(problem: &Problem, raw: RawFit, enforce_centering: bool) -> Result<FitResult> {
    let pre_centering_row_mean = max_abs_row_mean(&raw.coefficients);
    let mut trace = raw.trace;
    let coefficients = if enforce_centering {
        let before = *trace.last().unwrap();
        let centered = center_rows_unchecked(&raw.coefficients);
        let after = nll_unchecked(&centered, problem.data) + problem.penalty(&centered);
        // exact shift invariance of the likelihood; the penalty can only drop
        if after > before + 1e-10 * before.abs().max(1.0) {
            return Err(Error::Numeric(format!(
                "row centering increased the objective from {before} to {after}"
            )));
        }
        if after < before {
            trace.push(after);
        }
        CoefficientMatrix::new_centered(centered)?
    } else {
        CoefficientMatrix::new(raw.coefficients)?
    };
    Ok(FitResult {
        coefficients,
        objective_trace: trace,
        iterations: raw.iterations,
        converged: raw.converged,
        fixed_point_residual: raw.residual,
        step_size: raw.step,
        pre_centering_row_mean,
    })
}

/// Total objective `nll(B) + pen(B)`.
pub fn objective(data: &Dataset, spec: &PenaltySpec, b: &DMatrix<f64>) -> Result<f64> {
    spec.check_shape(data.d(), data.num_classes())?;
    Error::check_dim("coefficient rows", data.d(), b.nrows())?;
    Error::check_dim("coefficient columns", data.num_classes(), b.ncols())?;
    Ok(nll_unchecked(b, data) + penalty_value_unchecked(spec, b))
}

/// `|B - prox_t(B - t grad nll(B))|_F / t`.
pub fn fixed_point_residual(
    data: &Dataset,
    spec: &PenaltySpec,
    b: &DMatrix<f64>,
    step: f64,
    opts: &ProxOptions,
) -> Result<f64> {
    let (_, g) = crate::model::nll_and_grad(b, data)?;
    let p = prox(spec, &(b - g * step), step, opts)?;
    Ok((b - p).norm() / step)
}
