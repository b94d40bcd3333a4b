//! Seeded sweeps over synthetic designs and penalties.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::risk::{least_squares_slope, mean_and_se, risk_report};
use super::synthetic::{generate, SyntheticSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::penalties::{
    group_lasso_weight, group_slope_weights, nuclear_lambda, sparse_group_lasso_weights, sparse_group_slope_weights,
    WeightConfig,
};
use crate::penalty_spec::PenaltySpec;
use crate::rng::derive_seed;
use crate::solver::{fit, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyFamily {
    GroupSlope,
    SparseGroupSlope,
    Nuclear,
    GroupLasso,
    SparseGroupLasso,
}

impl PenaltyFamily {
    pub const ALL: [PenaltyFamily; 5] = [
        PenaltyFamily::GroupSlope,
        PenaltyFamily::SparseGroupSlope,
        PenaltyFamily::Nuclear,
        PenaltyFamily::GroupLasso,
        PenaltyFamily::SparseGroupLasso,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PenaltyFamily::GroupSlope => "group-slope",
            PenaltyFamily::SparseGroupSlope => "sparse-group-slope",
            PenaltyFamily::Nuclear => "nuclear",
            PenaltyFamily::GroupLasso => "group-lasso",
            PenaltyFamily::SparseGroupLasso => "sparse-group-lasso",
        }
    }
}

impl fmt::Display for PenaltyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PenaltyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PenaltyFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown penalty family '{s}'")))
    }
}

fn one() -> f64 {
    1.0
}

/// Penalty family plus the constants of its weight formula; the weights are
/// computed from each training sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyRecipe {
    pub family: PenaltyFamily,
    #[serde(default)]
    pub weights: WeightConfig,
    /// Global multiplier applied after the formula.
    #[serde(default = "one")]
    pub lambda_scale: f64,
    /// Label in output tables; defaults to the family name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl PenaltyRecipe {
    pub fn new(family: PenaltyFamily, weights: WeightConfig) -> Self {
        PenaltyRecipe {
            family,
            weights,
            lambda_scale: 1.0,
            name: None,
        }
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(self.family.name())
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.lambda_scale.is_finite() && self.lambda_scale > 0.0) {
            return Err(Error::invalid(format!(
                "lambda_scale must be positive, got {}",
                self.lambda_scale
            )));
        }
        Ok(())
    }

    /// Formula weights for `data`, multiplied by `lambda_scale`.
    pub fn build(&self, data: &Dataset) -> Result<PenaltySpec> {
        self.validate()?;
        let (n, d, l) = (data.n(), data.d(), data.num_classes());
        let w = &self.weights;
        let spec = match self.family {
            PenaltyFamily::GroupSlope => PenaltySpec::group_slope(group_slope_weights(d, l, n, w)?)?,
            PenaltyFamily::SparseGroupSlope => {
                let (lambda, kappa) = sparse_group_slope_weights(d, l, n, w)?;
                PenaltySpec::sparse_group_slope(lambda, kappa)?
            }
            PenaltyFamily::Nuclear => PenaltySpec::nuclear(nuclear_lambda(data, l, w)?)?,
            PenaltyFamily::GroupLasso => PenaltySpec::group_lasso(d, group_lasso_weight(d, l, n, w)?)?,
            PenaltyFamily::SparseGroupLasso => {
                let (lambda, kappa) = sparse_group_lasso_weights(d, l, n, w)?;
                PenaltySpec::sparse_group_lasso(d, l, lambda, kappa)?
            }
        };
        spec.scaled(self.lambda_scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentOptions {
    pub solver: SolverConfig,
    pub test_size: usize,
    pub mc_samples: usize,
    /// Fill `wall_ms`; otherwise it is written as 0 so that tables are reproducible.
    pub record_wall_time: bool,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            solver: SolverConfig::default(),
            test_size: 5000,
            mc_samples: 20000,
            record_wall_time: false,
        }
    }
}

/// One fit. Risk columns are empty when `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub grid_id: usize,
    pub penalty: String,
    pub replicate: usize,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "L")]
    pub num_classes: usize,
    pub structure: &'static str,
    pub d0_or_r0: usize,
    pub train_err: Option<f64>,
    pub test_err: Option<f64>,
    pub bayes_risk: Option<f64>,
    pub excess_risk: Option<f64>,
    pub kl_risk: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_ms: u64,
    pub error: Option<String>,
    #[serde(skip)]
    pub penalty_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub grid_id: usize,
    pub penalty: String,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "L")]
    pub num_classes: usize,
    pub structure: &'static str,
    pub d0_or_r0: usize,
    pub runs: usize,
    pub failed: usize,
    pub converged: usize,
    pub mean_excess_risk: f64,
    pub se_excess_risk: f64,
    pub mean_test_err: f64,
    pub se_test_err: f64,
    pub mean_kl_risk: f64,
    pub se_kl_risk: f64,
    pub mean_bayes_risk: f64,
    #[serde(skip)]
    pub penalty_index: usize,
}

/// `ln n` against `ln(mean excess risk)` with the per-penalty fitted slope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotRow {
    pub penalty: String,
    pub grid_id: usize,
    pub n: usize,
    pub log_n: f64,
    pub log_mean_excess_risk: Option<f64>,
    pub fitted_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentTable {
    /// Sorted by grid point, then penalty, then replicate.
    pub rows: Vec<ExperimentRow>,
}

/// Seed of replicate `replicate` at grid point `grid_id`.
pub fn replicate_seed(master_seed: u64, grid_id: usize, replicate: usize) -> u64 {
    derive_seed(master_seed, &[grid_id as u64, replicate as u64])
}

/// Generates, fits and scores every grid point x penalty x replicate.
///
/// Each (grid point, replicate) pair gets its own seed, replacing the seed
/// of the grid spec; all penalties on that pair share data and test sample.
/// Work is spread over the current rayon pool and rows are sorted by their
/// key afterwards, so the table does not depend on the thread count.
/// Fit failures are recorded in the row's `error` column.
pub fn scaling_experiment(
    grid: &[SyntheticSpec],
    penalties: &[PenaltyRecipe],
    replicates: usize,
    master_seed: u64,
    opts: &ExperimentOptions,
) -> Result<ExperimentTable> {
    if grid.is_empty() {
        return Err(Error::invalid("experiment grid is empty"));
    }
    if opts.test_size == 0 || opts.mc_samples == 0 {
        return Err(Error::invalid("test_size and mc_samples must be positive"));
    }
    for spec in grid {
        spec.validate()?;
    }
    for recipe in penalties {
        recipe.validate()?;
    }
    opts.solver.validate()?;
    if penalties.is_empty() || replicates == 0 {
        return Ok(ExperimentTable::default());
    }

    let tasks: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..replicates).map(move |r| (g, r)))
        .collect();
    let per_task = tasks
        .into_par_iter()
        .map(|(g, r)| run_cell(g, r, &grid[g], penalties, master_seed, opts))
        .collect::<Result<Vec<Vec<ExperimentRow>>>>()?;
    let mut rows: Vec<ExperimentRow> = per_task.into_iter().flatten().collect();
    rows.sort_by_key(|row| (row.grid_id, row.penalty_index, row.replicate));
    Ok(ExperimentTable { rows })
}

fn run_cell(
    grid_id: usize,
    replicate: usize,
    base: &SyntheticSpec,
    penalties: &[PenaltyRecipe],
    master_seed: u64,
    opts: &ExperimentOptions,
) -> Result<Vec<ExperimentRow>> {
    let spec = SyntheticSpec {
        seed: replicate_seed(master_seed, grid_id, replicate),
        ..base.clone()
    };
    let (data, truth) = generate(&spec)?;
    Ok(penalties
        .iter()
        .enumerate()
        .map(|(p, recipe)| {
            let start = Instant::now();
            let outcome = recipe.build(&data).and_then(|pen| {
                let fitted = fit(&data, &pen, &opts.solver)?;
                let report = risk_report(&fitted.coefficients, &truth, &spec, &data, opts.test_size, opts.mc_samples)?;
                Ok((fitted, report))
            });
            let wall_ms = if opts.record_wall_time {
                start.elapsed().as_millis() as u64
            } else {
                0
            };
            let mut row = ExperimentRow {
                grid_id,
                penalty: recipe.label().to_string(),
                replicate,
                seed: spec.seed,
                n: spec.n,
                d: spec.d,
                num_classes: spec.num_classes,
                structure: spec.structure.name(),
                d0_or_r0: spec.structure.size(),
                train_err: None,
                test_err: None,
                bayes_risk: None,
                excess_risk: None,
                kl_risk: None,
                iterations: 0,
                converged: false,
                wall_ms,
                error: None,
                penalty_index: p,
            };
            match outcome {
                Ok((fitted, report)) => {
                    row.train_err = Some(report.train_error);
                    row.test_err = Some(report.test_error);
                    row.bayes_risk = Some(report.bayes_risk);
                    row.excess_risk = Some(report.excess_risk);
                    row.kl_risk = Some(report.kl_risk);
                    row.iterations = fitted.iterations;
                    row.converged = fitted.converged;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect())
}

fn mean_se_of(rows: &[&ExperimentRow], field: impl Fn(&ExperimentRow) -> Option<f64>) -> (f64, f64) {
    let values: Vec<f64> = rows.iter().filter_map(|r| field(r)).collect();
    mean_and_se(&values)
}

impl ExperimentTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Fraction of rows whose fit converged without error (1 for an empty table).
    pub fn converged_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            return 1.0;
        }
        self.rows.iter().filter(|r| r.converged && r.error.is_none()).count() as f64 / self.rows.len() as f64
    }

    /// Mean and standard error per (grid point, penalty), over rows without error.
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut out = Vec::new();
        for chunk in self
            .rows
            .chunk_by(|a, b| a.grid_id == b.grid_id && a.penalty_index == b.penalty_index)
        {
            let ok: Vec<&ExperimentRow> = chunk.iter().filter(|r| r.error.is_none()).collect();
            let first = &chunk[0];
            let (mean_excess_risk, se_excess_risk) = mean_se_of(&ok, |r| r.excess_risk);
            let (mean_test_err, se_test_err) = mean_se_of(&ok, |r| r.test_err);
            let (mean_kl_risk, se_kl_risk) = mean_se_of(&ok, |r| r.kl_risk);
            let (mean_bayes_risk, _) = mean_se_of(&ok, |r| r.bayes_risk);
            out.push(AggregateRow {
                grid_id: first.grid_id,
                penalty: first.penalty.clone(),
                n: first.n,
                d: first.d,
                num_classes: first.num_classes,
                structure: first.structure,
                d0_or_r0: first.d0_or_r0,
                runs: chunk.len(),
                failed: chunk.len() - ok.len(),
                converged: ok.iter().filter(|r| r.converged).count(),
                mean_excess_risk,
                se_excess_risk,
                mean_test_err,
                se_test_err,
                mean_kl_risk,
                se_kl_risk,
                mean_bayes_risk,
                penalty_index: first.penalty_index,
            });
        }
        out
    }

    /// Log-log points per penalty and the least-squares slope through them.
    /// Grid points with a non-positive mean excess risk are listed but not fitted.
    pub fn plot_data(&self) -> Vec<PlotRow> {
        let agg = self.aggregate();
        let mut penalties: Vec<(usize, &str)> = Vec::new();
        for row in &self.rows {
            if !penalties.iter().any(|(i, _)| *i == row.penalty_index) {
                penalties.push((row.penalty_index, &row.penalty));
            }
        }
        penalties.sort_unstable();
        let mut out = Vec::new();
        for (index, label) in penalties {
            let cells: Vec<&AggregateRow> = agg.iter().filter(|a| a.penalty_index == index).collect();
            let points: Vec<(f64, f64)> = cells
                .iter()
                .filter(|a| a.mean_excess_risk > 0.0)
                .map(|a| ((a.n as f64).ln(), a.mean_excess_risk.ln()))
                .collect();
            let slope = least_squares_slope(&points);
            for a in cells {
                out.push(PlotRow {
                    penalty: label.to_string(),
                    grid_id: a.grid_id,
                    n: a.n,
                    log_n: (a.n as f64).ln(),
                    log_mean_excess_risk: (a.mean_excess_risk > 0.0).then(|| a.mean_excess_risk.ln()),
                    fitted_slope: slope,
                });
            }
        }
        out
    }

    pub fn write_runs_csv<W: Write>(&self, w: W) -> Result<()> {
        write_csv(w, &self.rows, RUN_COLUMNS)
    }

    pub fn write_aggregate_csv<W: Write>(&self, w: W) -> Result<()> {
        write_csv(w, &self.aggregate(), AGGREGATE_COLUMNS)
    }

    pub fn write_plot_csv<W: Write>(&self, w: W) -> Result<()> {
        write_csv(w, &self.plot_data(), PLOT_COLUMNS)
    }
}

const RUN_COLUMNS: &[&str] = &[
    "grid_id", "penalty", "replicate", "seed", "n", "d", "L", "structure", "d0_or_r0", "train_err", "test_err",
    "bayes_risk", "excess_risk", "kl_risk", "iterations", "converged", "wall_ms", "error",
];
const AGGREGATE_COLUMNS: &[&str] = &[
    "grid_id", "penalty", "n", "d", "L", "structure", "d0_or_r0", "runs", "failed", "converged", "mean_excess_risk",
    "se_excess_risk", "mean_test_err", "se_test_err", "mean_kl_risk", "se_kl_risk", "mean_bayes_risk",
];
const PLOT_COLUMNS: &[&str] = &["penalty", "grid_id", "n", "log_n", "log_mean_excess_risk", "fitted_slope"];

/// Header is written even when there are no rows.
fn write_csv<W: Write, T: Serialize>(w: W, rows: &[T], header: &[&str]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    writer.write_record(header).map_err(csv_error)?;
    for row in rows {
        writer.serialize(row).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Numeric(format!("csv output failed: {other:?}")),
    }
}
