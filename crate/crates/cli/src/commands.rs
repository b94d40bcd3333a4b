use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use mslope::eval::{
    generate, rademacher_mc, risk_report, scaling_experiment, streams, FeatureSampler, PenaltyRecipe,
};
use mslope::io::{read_dataset_csv, write_coefficients};
use mslope::{fit as fit_model, rng_stream, CoefficientMatrix, Dataset, FitResult, PenaltySpec};
use serde::Serialize;

use crate::cli::Overrides;
use crate::config::{self, FitConfig, RademacherConfig, ScalingConfig, SimulateConfig};
use crate::{CliError, Outcome};

/// Entries below this fraction of the largest `|B|` entry count as zero in support summaries.
const SUPPORT_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-8;
/// Smallest fraction of converged fits for a successful sweep.
const MIN_CONVERGED: f64 = 0.95;

fn check_seed(seed: u64) -> Result<(), CliError> {
    if seed > i64::MAX as u64 {
        return Err(CliError::Invalid(format!("seed {seed} exceeds 2^63 - 1")));
    }
    Ok(())
}

fn prepare_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Invalid(format!("cannot create {}: {e}", dir.display())))
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Other(format!("cannot start thread pool: {e}")))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_with(path: &Path, f: impl FnOnce(BufWriter<File>) -> mslope::Result<()>) -> Result<(), CliError> {
    f(BufWriter::new(File::create(path)?))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct FitSummary {
    penalty: String,
    n: usize,
    d: usize,
    #[serde(rename = "L")]
    num_classes: usize,
    objective: f64,
    iterations: usize,
    converged: bool,
    fixed_point_residual: f64,
    nonzero_rows: usize,
    nonzero_entries: usize,
    numerical_rank: usize,
}

struct Support {
    nonzero_rows: usize,
    row_nonzeros: Vec<usize>,
    rank: usize,
}

fn support(b: &CoefficientMatrix) -> Support {
    let values = b.values();
    let cutoff = SUPPORT_TOL * values.amax();
    let row_nonzeros: Vec<usize> = values
        .row_iter()
        .map(|r| r.iter().filter(|v| v.abs() > cutoff).count())
        .collect();
    Support {
        nonzero_rows: row_nonzeros.iter().filter(|&&c| c > 0).count(),
        row_nonzeros,
        rank: b.numerical_rank(RANK_TOL),
    }
}

fn summarize(label: &str, data: &Dataset, result: &FitResult) -> FitSummary {
    let s = support(&result.coefficients);
    println!(
        "{label}: objective {:.10} after {} iterations ({})",
        result.objective(),
        result.iterations,
        if result.converged { "converged" } else { "NOT converged" }
    );
    println!("non-zero rows: {}", s.nonzero_rows);
    let per_row: Vec<String> = s
        .row_nonzeros
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(j, c)| format!("x{}:{c}", j + 1))
        .collect();
    println!("non-zeros per selected row: {}", if per_row.is_empty() { "-".into() } else { per_row.join(" ") });
    println!("numerical rank: {}", s.rank);
    FitSummary {
        penalty: label.to_string(),
        n: data.n(),
        d: data.d(),
        num_classes: data.num_classes(),
        objective: result.objective(),
        iterations: result.iterations,
        converged: result.converged,
        fixed_point_residual: result.fixed_point_residual,
        nonzero_rows: s.nonzero_rows,
        nonzero_entries: s.row_nonzeros.iter().sum(),
        numerical_rank: s.rank,
    }
}

fn outcome(converged: bool) -> Outcome {
    if converged {
        Outcome::Success
    } else {
        Outcome::ConvergenceShortfall
    }
}

fn build_penalty(recipe: &PenaltyRecipe, data: &Dataset) -> Result<PenaltySpec, CliError> {
    Ok(recipe.build(data)?)
}

pub fn fit(
    data: Option<PathBuf>,
    num_classes: Option<usize>,
    standardize: bool,
    overrides: &Overrides,
) -> Result<Outcome, CliError> {
    let mut cfg: FitConfig = match &overrides.config {
        Some(path) => config::load(path)?,
        None => FitConfig {
            data: data.clone().ok_or_else(|| CliError::Invalid("fit needs --data or --config".into()))?,
            num_classes: None,
            standardize: false,
            out_dir: PathBuf::from("out"),
            penalty: PenaltyRecipe::new(mslope::eval::PenaltyFamily::GroupSlope, Default::default()),
            solver: Default::default(),
        },
    };
    if let Some(path) = data {
        cfg.data = path;
    }
    if num_classes.is_some() {
        cfg.num_classes = num_classes;
    }
    cfg.standardize |= standardize;
    overrides.apply_fit(&mut cfg);
    cfg.penalty.validate()?;
    cfg.solver.validate()?;

    let mut dataset = read_dataset_csv(&cfg.data, cfg.num_classes)?;
    if cfg.standardize {
        dataset = dataset.standardize()?;
    }
    let spec = build_penalty(&cfg.penalty, &dataset)?;
    let result = thread_pool(overrides.threads.unwrap_or(1))?.install(|| fit_model(&dataset, &spec, &cfg.solver))?;

    prepare_out_dir(&cfg.out_dir)?;
    write_coefficients(cfg.out_dir.join("coefficients.csv"), &result.coefficients, Some(&spec))?;
    let summary = summarize(cfg.penalty.label(), &dataset, &result);
    write_rows(&cfg.out_dir.join("fit_summary.csv"), &[summary])?;
    config::write_resolved(&cfg, &cfg.out_dir)?;
    Ok(outcome(result.converged))
}

#[derive(Debug, Serialize)]
struct RiskRow {
    penalty: String,
    seed: u64,
    n: usize,
    d: usize,
    #[serde(rename = "L")]
    num_classes: usize,
    structure: &'static str,
    d0_or_r0: usize,
    iterations: usize,
    converged: bool,
    objective: f64,
    train_err: f64,
    test_err: f64,
    test_err_se: f64,
    bayes_risk: f64,
    bayes_risk_se: f64,
    excess_risk: f64,
    excess_risk_se: f64,
    kl_risk: f64,
    fitted_alpha: Option<f64>,
}

#[derive(Debug, Serialize)]
struct MarginRow {
    h: f64,
    cdf: f64,
}

pub fn simulate(overrides: &Overrides) -> Result<Outcome, CliError> {
    let path = overrides
        .config
        .as_ref()
        .ok_or_else(|| CliError::Invalid("simulate needs --config".into()))?;
    let mut cfg: SimulateConfig = config::load(path)?;
    overrides.apply_simulate(&mut cfg);
    check_seed(cfg.seed)?;
    cfg.penalty.validate()?;
    cfg.experiment.solver.validate()?;
    let spec = cfg.design.with_seed(cfg.seed);
    spec.validate()?;

    let pool = thread_pool(overrides.threads.unwrap_or(1))?;
    let (data, truth) = generate(&spec)?;
    let penalty = build_penalty(&cfg.penalty, &data)?;
    let result = pool.install(|| fit_model(&data, &penalty, &cfg.experiment.solver))?;
    let opts = &cfg.experiment;
    let report = risk_report(&result.coefficients, &truth, &spec, &data, opts.test_size, opts.mc_samples)?;

    prepare_out_dir(&cfg.out_dir)?;
    let row = RiskRow {
        penalty: cfg.penalty.label().to_string(),
        seed: spec.seed,
        n: spec.n,
        d: spec.d,
        num_classes: spec.num_classes,
        structure: spec.structure.name(),
        d0_or_r0: spec.structure.size(),
        iterations: result.iterations,
        converged: result.converged,
        objective: result.objective(),
        train_err: report.train_error,
        test_err: report.test_error,
        test_err_se: report.test_error_se,
        bayes_risk: report.bayes_risk,
        bayes_risk_se: report.bayes_risk_se,
        excess_risk: report.excess_risk,
        excess_risk_se: report.excess_risk_se,
        kl_risk: report.kl_risk,
        fitted_alpha: report.margin.fitted_alpha,
    };
    write_rows(&cfg.out_dir.join("risk_report.csv"), &[row])?;
    let margin: Vec<MarginRow> = report
        .margin
        .grid
        .iter()
        .zip(&report.margin.cdf)
        .map(|(&h, &cdf)| MarginRow { h, cdf })
        .collect();
    write_rows(&cfg.out_dir.join("margin_cdf.csv"), &margin)?;
    write_coefficients(cfg.out_dir.join("coefficients.csv"), &result.coefficients, Some(&penalty))?;
    summarize(cfg.penalty.label(), &data, &result);
    println!(
        "excess risk {:.6} (se {:.6}), test error {:.4}, Bayes risk {:.4}, KL risk {:.6}",
        report.excess_risk, report.excess_risk_se, report.test_error, report.bayes_risk, report.kl_risk
    );
    config::write_resolved(&cfg, &cfg.out_dir)?;
    Ok(outcome(result.converged))
}

pub fn scaling(overrides: &Overrides) -> Result<Outcome, CliError> {
    let path = overrides
        .config
        .as_ref()
        .ok_or_else(|| CliError::Invalid("scaling needs --config".into()))?;
    let mut cfg: ScalingConfig = config::load(path)?;
    overrides.apply_scaling(&mut cfg);
    check_seed(cfg.seed)?;
    if cfg.replicates == 0 {
        return Err(CliError::Invalid("replicates must be positive".into()));
    }
    if cfg.n_values.contains(&0) {
        return Err(CliError::Invalid("n_values must be positive".into()));
    }
    let grid = cfg.grid();
    let pool = thread_pool(cfg.threads)?;
    let table = pool.install(|| scaling_experiment(&grid, &cfg.penalties, cfg.replicates, cfg.seed, &cfg.experiment))?;

    prepare_out_dir(&cfg.out_dir)?;
    write_with(&cfg.out_dir.join("runs.csv"), |w| table.write_runs_csv(w))?;
    write_with(&cfg.out_dir.join("aggregate.csv"), |w| table.write_aggregate_csv(w))?;
    write_with(&cfg.out_dir.join("plot_data.csv"), |w| table.write_plot_csv(w))?;
    config::write_resolved(&cfg, &cfg.out_dir)?;

    let plot = table.plot_data();
    for recipe in &cfg.penalties {
        let slope = plot.iter().find(|p| p.penalty == recipe.label()).and_then(|p| p.fitted_slope);
        match slope {
            Some(s) => println!("{}: log-log slope {s:.4}", recipe.label()),
            None => println!("{}: log-log slope unavailable", recipe.label()),
        }
    }
    let fraction = table.converged_fraction();
    println!("{} fits, {:.1}% converged", table.rows.len(), 100.0 * fraction);
    Ok(outcome(fraction >= MIN_CONVERGED))
}

#[derive(Debug, Serialize)]
struct RademacherRow {
    penalty: String,
    seed: u64,
    n: usize,
    d: usize,
    #[serde(rename = "L")]
    num_classes: usize,
    num_draws: usize,
    estimate: f64,
    se: f64,
    reference: f64,
    ratio: f64,
}

pub fn rademacher(overrides: &Overrides) -> Result<Outcome, CliError> {
    let path = overrides
        .config
        .as_ref()
        .ok_or_else(|| CliError::Invalid("rademacher needs --config".into()))?;
    let mut cfg: RademacherConfig = config::load(path)?;
    overrides.apply_rademacher(&mut cfg);
    check_seed(cfg.seed)?;
    let f = &cfg.features;
    if f.n == 0 || f.d == 0 || f.num_classes < 2 {
        return Err(CliError::Invalid(format!(
            "need n, d >= 1 and L >= 2 (got n={}, d={}, L={})",
            f.n, f.d, f.num_classes
        )));
    }
    if cfg.num_draws == 0 {
        return Err(CliError::Invalid("num_draws must be positive".into()));
    }
    let sampler = FeatureSampler::new(&f.feature_law, f.d)?;
    let x = sampler.sample(f.n, &mut rng_stream(cfg.seed, streams::FEATURES));
    // the weight formulas use only n, d, L and the features
    let placeholder = Dataset::new(x.clone(), (0..f.n).map(|i| i % f.num_classes).collect(), f.num_classes)?;
    let penalty = build_penalty(&cfg.penalty, &placeholder)?;
    let pool = thread_pool(overrides.threads.unwrap_or(1))?;
    let est = pool.install(|| rademacher_mc(&penalty, &x, f.num_classes, cfg.num_draws, cfg.seed))?;

    let reference = 7.0 / 720.0 * (f.n as f64).sqrt();
    let row = RademacherRow {
        penalty: cfg.penalty.label().to_string(),
        seed: cfg.seed,
        n: f.n,
        d: f.d,
        num_classes: f.num_classes,
        num_draws: cfg.num_draws,
        estimate: est.mean,
        se: est.se,
        reference,
        ratio: est.mean / reference,
    };
    prepare_out_dir(&cfg.out_dir)?;
    write_rows(&cfg.out_dir.join("rademacher.csv"), &[row])?;
    config::write_resolved(&cfg, &cfg.out_dir)?;
    println!(
        "{}: estimate {:.6} (se {:.6}), ratio to 7 sqrt(n) / 720 = {:.4}",
        cfg.penalty.label(),
        est.mean,
        est.se,
        est.mean / reference
    );
    Ok(Outcome::Success)
}
