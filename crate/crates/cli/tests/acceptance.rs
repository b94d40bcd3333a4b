//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! for each and exits non-zero if any failed.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mslope::eval::{
    generate, rademacher_mc, scaling_experiment, Covariance, ExperimentOptions, ExperimentTable, FeatureLaw,
    PenaltyFamily, PenaltyRecipe, Structure, SyntheticSpec,
};
use mslope::model::{grad_nll, nll};
use mslope::penalties::{
    dual_norm, group_slope_weights, penalty_value, prox_group_slope, prox_nuclear, prox_sorted_l1,
    prox_sparse_group_slope, prox_sparse_group_slope_composition, prox_sparse_group_slope_dykstra, ProxOptions,
    WeightConfig,
};
use mslope::rng::{derive_seed, rng_stream};
use mslope::solver::{complexity_penalty, fit_exhaustive_complexity, fixed_point_residual};
use mslope::{center_rows, fit, Dataset, PenaltySpec, SolverConfig};
use mslope_testkit as tk;
use nalgebra::DMatrix;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_dataset(rng: &mut tk::TestRng, n: usize, d: usize, l: usize) -> Dataset {
    let x = tk::normal_matrix(n, d, rng);
    let labels = (0..n).map(|_| rng.random_range(0..l)).collect();
    Dataset::new(x, labels, l).unwrap()
}

fn gaussian_design(n: usize, d: usize, l: usize, structure: Structure, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n,
        d,
        num_classes: l,
        structure,
        signal_scale: 1.0,
        delta: 0.05,
        feature_law: FeatureLaw::Gaussian {
            covariance: Covariance::Identity,
        },
        seed,
    }
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = tk::test_rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (n, d, l) = (rng.random_range(5..=50), rng.random_range(1..=10), rng.random_range(2..=5));
        let data = random_dataset(&mut rng, n, d, l);
        let b = tk::normal_matrix(d, l, &mut rng) * 0.5;
        let g = grad_nll(&b, &data).unwrap();
        let fd = tk::finite_difference_gradient(|m| tk::direct_nll(m, data.features(), data.labels()), &b, 1e-4);
        worst = worst.max((&g - &fd).norm() / g.norm().max(1e-12));
    }
    let elapsed = start.elapsed();
    ensure(worst < 1e-6, || format!("relative error {worst:.2e}"))?;
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("max relative error {worst:.2e} in {:.2} s", elapsed.as_secs_f64()))
}

fn as_column(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v)
}

fn prox_oracle_equivalence() -> Outcome {
    const RESTARTS: usize = 20;
    let start = Instant::now();
    let mut rng = tk::test_rng(102);
    let mut worst = [0.0f64; 4];
    for _ in 0..10 {
        let (d, l) = (rng.random_range(1..=5), rng.random_range(2..=4));
        let v = tk::normal_matrix(d, l, &mut rng) * 1.5;
        let step = rng.random_range(0.3..1.5);
        let lambda = tk::random_weights(d, 0.8, &mut rng);
        let kappa = tk::random_weights(l, 0.4, &mut rng);

        let vec: Vec<f64> = v.column(0).iter().cloned().collect();
        let fast = prox_sorted_l1(&vec, &lambda, step).unwrap();
        let oracle = tk::min_norm_prox(&as_column(&vec), step, |x| as_column(&tk::slope_atom(x.as_slice(), &lambda)), RESTARTS, &mut rng);
        worst[0] = worst[0].max((as_column(&fast) - &oracle.point).amax());

        let fast = prox_group_slope(&v, &lambda, step).unwrap();
        let oracle = tk::min_norm_prox(&v, step, |x| tk::group_slope_atom(x, &lambda), RESTARTS, &mut rng);
        worst[1] = worst[1].max((&fast - &oracle.point).amax());

        let fast = prox_sparse_group_slope(&v, &lambda, &kappa, step, 1e-12).unwrap();
        let oracle = tk::min_norm_prox(
            &v,
            step,
            |x| tk::group_slope_atom(x, &lambda) + tk::row_slope_atom(x, &kappa),
            RESTARTS,
            &mut rng,
        );
        worst[2] = worst[2].max((&fast - &oracle.point).amax());

        let lam = rng.random_range(0.2..1.0);
        let fast = prox_nuclear(&v, lam, step).unwrap();
        let oracle = tk::min_norm_prox(&v, step, |x| tk::polar_factor(x, 1e-12) * lam, RESTARTS, &mut rng);
        worst[3] = worst[3].max((&fast - &oracle.point).amax());
    }
    let elapsed = start.elapsed();
    let max = worst.iter().cloned().fold(0.0, f64::max);
    ensure(max < 1e-3, || format!("sup errors (sorted, group, sparse group, nuclear) {worst:?}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "sup errors sorted {:.1e}, group {:.1e}, sparse group {:.1e}, nuclear {:.1e} in {:.1} s",
        worst[0],
        worst[1],
        worst[2],
        worst[3],
        elapsed.as_secs_f64()
    ))
}

/// Nonexpansiveness and minimality of the prox objective on random pairs.
fn check_pairs(
    name: &str,
    shape: (usize, usize),
    rng: &mut tk::TestRng,
    prox: impl Fn(&DMatrix<f64>, f64) -> DMatrix<f64>,
    pen: impl Fn(&DMatrix<f64>) -> f64,
) -> Result<(), String> {
    const TOL: f64 = 1e-10;
    for _ in 0..100 {
        let step = rng.random_range(0.2..2.0);
        let v1 = tk::normal_matrix(shape.0, shape.1, rng) * 1.5;
        let v2 = tk::normal_matrix(shape.0, shape.1, rng) * 1.5;
        let (p1, p2) = (prox(&v1, step), prox(&v2, step));
        let (dist_in, dist_out) = ((&v1 - &v2).norm(), (&p1 - &p2).norm());
        ensure(dist_out <= dist_in + TOL, || format!("{name}: |p1-p2| {dist_out} > |v1-v2| {dist_in}"))?;
        let h = |x: &DMatrix<f64>| 0.5 * (x - &v1).norm_squared() + step * pen(x);
        let at_prox = h(&p1);
        for other in [&v1, &p2, &DMatrix::zeros(shape.0, shape.1)] {
            let value = h(other);
            ensure(at_prox <= value + TOL, || format!("{name}: prox objective {at_prox} above {value}"))?;
        }
    }
    Ok(())
}

fn prox_properties() -> Outcome {
    let mut rng = tk::test_rng(103);
    let (d, l) = (4, 3);
    let w = tk::random_weights(d * l, 0.5, &mut rng);
    check_pairs(
        "sorted-l1",
        (d * l, 1),
        &mut rng,
        |v, t| as_column(&prox_sorted_l1(v.as_slice(), &w, t).unwrap()),
        |x| tk::slope_norm(x.as_slice(), &w),
    )?;
    let lambda = tk::random_weights(d, 0.8, &mut rng);
    let kappa = tk::random_weights(l, 0.4, &mut rng);
    let opts = ProxOptions {
        tol: 1e-13,
        centered: false,
    };
    for spec in [
        PenaltySpec::group_slope(lambda.clone()).unwrap(),
        PenaltySpec::sparse_group_slope(lambda.clone(), kappa.clone()).unwrap(),
        PenaltySpec::nuclear(0.6).unwrap(),
    ] {
        check_pairs(
            spec.family(),
            (d, l),
            &mut rng,
            |v, t| mslope::penalties::prox(&spec, v, t, &opts).unwrap(),
            |x| penalty_value(&spec, x).unwrap(),
        )?;
    }
    Ok("400 pairs, nonexpansive and objective-minimal within 1e-10".into())
}

fn sparse_group_lasso_closed_form() -> Outcome {
    let mut rng = tk::test_rng(104);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (d, l) = (rng.random_range(1..=6), rng.random_range(2..=5));
        let v = tk::normal_matrix(d, l, &mut rng);
        let (lam, kap, step) = (rng.random_range(0.05..0.8), rng.random_range(0.05..0.8), rng.random_range(0.3..2.0));
        let expected = tk::sparse_group_lasso_prox(&v, lam, kap, step);
        let composed = prox_sparse_group_slope_composition(&v, &vec![lam; d], &vec![kap; l], step).unwrap();
        let split = prox_sparse_group_slope_dykstra(&v, &vec![lam; d], &vec![kap; l], step, 1e-13, false).unwrap();
        worst = worst.max((&composed - &expected).amax()).max((&split - &expected).amax());
    }
    ensure(worst < 1e-8, || format!("sup error {worst:.2e}"))?;
    Ok(format!("composition and Dykstra within {worst:.1e} of the closed form on 20 instances"))
}

fn zero_row_mean() -> Outcome {
    let cfg = SolverConfig {
        grad_map_tol: 1e-9,
        enforce_centering: false,
        max_iter: 50_000,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let (data, _) = generate(&gaussian_design(200, 20, 4, Structure::GlobalRowSparse { d0: 3 }, 500 + seed)).unwrap();
        let lambda = group_slope_weights(20, 4, 200, &WeightConfig { c0: 2.0, ..Default::default() }).unwrap();
        let res = fit(&data, &PenaltySpec::group_slope(lambda).unwrap(), &cfg).unwrap();
        ensure(res.converged, || format!("seed {seed} did not converge"))?;
        let raw = mslope::data::max_abs_row_mean(res.coefficients.values());
        worst = worst.max(res.pre_centering_row_mean).max(raw);
    }
    ensure(worst < 1e-4, || format!("max |row mean| {worst:.2e}"))?;
    Ok(format!("max |row mean| before centering {worst:.2e} over 10 fits"))
}

fn nuclear_centering() -> Outcome {
    let mut rng = tk::test_rng(106);
    let spec = PenaltySpec::nuclear(0.7).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let (d, l) = (rng.random_range(1..=8), rng.random_range(2..=6));
        let b = tk::normal_matrix(d, l, &mut rng) + tk::normal_matrix(d, 1, &mut rng) * DMatrix::from_element(1, l, 1.0);
        let before = penalty_value(&spec, &b).unwrap();
        let after = penalty_value(&spec, &center_rows(&b).unwrap()).unwrap();
        worst = worst.max(after - before);
    }
    ensure(worst <= 1e-10, || format!("centering increased the penalty by {worst:.2e}"))?;
    Ok(format!("largest change after centering {worst:.2e} over 50 matrices"))
}

/// Exhaustive complexity-penalized choice computed with the testkit Newton MLE.
fn newton_exhaustive(data: &Dataset, c1: f64, c2: f64) -> (Vec<usize>, f64) {
    let (n, d, l) = (data.n() as f64, data.d(), data.num_classes());
    let mut best = (Vec::new(), f64::INFINITY);
    for mask in 0u32..(1 << d) {
        let support: Vec<usize> = (0..d).filter(|j| mask & (1 << j) != 0).collect();
        let nll = if support.is_empty() {
            (l as f64).ln()
        } else {
            let sub = data.select_features(&support).unwrap();
            let b = tk::newton_mle(sub.features(), sub.labels(), l);
            tk::direct_nll(&b, sub.features(), sub.labels())
        };
        let value = n * nll + complexity_penalty(support.len(), d, l, c1, c2);
        if value < best.1 - 1e-9 {
            best = (support, value);
        }
    }
    best
}

fn solver_optimality() -> Outcome {
    let tight = SolverConfig {
        grad_map_tol: 1e-10,
        max_iter: 50_000,
        ..Default::default()
    };
    let mut worst_refit: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    let mut worst_oracle_fixed_point: f64 = 0.0;
    let mut rng = tk::test_rng(107);
    for seed in 0..5u64 {
        let d = 4 + (seed as usize % 3);
        let (data, _) = generate(&SyntheticSpec {
            signal_scale: 3.0,
            ..gaussian_design(150, d, 3, Structure::GlobalRowSparse { d0: 2 }, 700 + seed)
        })
        .unwrap();

        let ours = fit_exhaustive_complexity(&data, 1.0, 1.0, d, &tight).unwrap();
        ensure(ours.all_converged, || format!("seed {seed}: restricted fits did not converge"))?;
        let (support, criterion) = newton_exhaustive(&data, 1.0, 1.0);
        ensure(ours.support == support, || format!("seed {seed}: support {:?} vs {support:?}", ours.support))?;
        let refit = nll(ours.fit.coefficients.values(), &data).unwrap();
        let gap = (ours.criterion - criterion).abs() / data.n() as f64;
        ensure(gap < 1e-6, || format!("seed {seed}: objective gap {gap:.2e} (nll {refit})"))?;
        worst_refit = worst_refit.max(gap);

        let lambda = group_slope_weights(d, 3, 150, &WeightConfig { c0: 2.0, ..Default::default() }).unwrap();
        let specs = [
            PenaltySpec::group_slope(lambda.clone()).unwrap(),
            PenaltySpec::sparse_group_slope(lambda.clone(), vec![0.03, 0.02, 0.01]).unwrap(),
            PenaltySpec::nuclear(0.05).unwrap(),
        ];
        let cfg = SolverConfig {
            grad_map_tol: 1e-9,
            max_iter: 50_000,
            ..Default::default()
        };
        for spec in &specs {
            let res = fit(&data, spec, &cfg).unwrap();
            ensure(res.converged, || format!("seed {seed}: {} did not converge", spec.family()))?;
            let b = res.coefficients.values();
            let opts = ProxOptions {
                tol: cfg.prox_tol,
                centered: matches!(spec, PenaltySpec::SparseGroupSlope { .. }),
            };
            let step = res.step_size;
            let raw = fixed_point_residual(&data, spec, b, step, &opts).unwrap() * step;
            let bound = cfg.grad_map_tol * (1.0 + b.norm());
            ensure(raw < bound, || format!("seed {seed}: {} residual {raw:.2e} >= {bound:.2e}", spec.family()))?;
            worst_residual = worst_residual.max(raw / bound);
        }

        // group Slope solution against the independent prox oracle
        let res = fit(&data, &specs[0], &cfg).unwrap();
        let b = res.coefficients.values();
        let g = grad_nll(b, &data).unwrap();
        let step = 0.5;
        let p = tk::min_norm_prox(&(b - g * step), step, |x| tk::group_slope_atom(x, &lambda), 3, &mut rng);
        worst_oracle_fixed_point = worst_oracle_fixed_point.max((b - &p.point).amax());
    }
    ensure(worst_oracle_fixed_point < 1e-6, || {
        format!("oracle fixed-point gap {worst_oracle_fixed_point:.2e}")
    })?;
    Ok(format!(
        "exhaustive refit within {worst_refit:.1e} of the Newton oracle; residual <= {worst_residual:.2} x tolerance; oracle fixed-point gap {worst_oracle_fixed_point:.1e}"
    ))
}

fn dual_rademacher_consistency() -> Outcome {
    let mut rng = tk::test_rng(108);
    let (n, d, l) = (20, 3, 3);
    let x = tk::normal_matrix(n, d, &mut rng);
    let lambda = tk::random_weights(d, 1.0, &mut rng);
    let kappa = tk::random_weights(l, 0.5, &mut rng);
    type Norm = Box<dyn Fn(&DMatrix<f64>) -> f64>;
    let (lam_gs, lam_sgs, kap_sgs) = (lambda.clone(), lambda.clone(), kappa.clone());
    let cases: Vec<(PenaltySpec, Norm)> = vec![
        (
            PenaltySpec::group_slope(lambda.clone()).unwrap(),
            Box::new(move |b| tk::group_slope_norm(b, &lam_gs)),
        ),
        (
            PenaltySpec::sparse_group_slope(lambda.clone(), kappa.clone()).unwrap(),
            Box::new(move |b| tk::group_slope_norm(b, &lam_sgs) + tk::row_slope_norm(b, &kap_sgs)),
        ),
        (PenaltySpec::nuclear(0.8).unwrap(), Box::new(|b| 0.8 * tk::nuclear_norm(b))),
    ];
    let seed = 9;
    let mut worst_ratio: f64 = 1.0;
    for (spec, norm) in &cases {
        let est = rademacher_mc(spec, &x, l, 5, seed).unwrap();
        for (k, &value) in est.draws.iter().enumerate() {
            let mut srng = rng_stream(derive_seed(seed, &[k as u64]), 0);
            let sigma = DMatrix::from_fn(n, l, |_, _| if srng.random::<bool>() { 1.0 } else { -1.0 });
            let a = x.tr_mul(&sigma) / (n as f64).sqrt();
            let direct = dual_norm(spec, &a).unwrap();
            ensure(value == direct, || format!("{}: draw {k} is {value}, dual norm {direct}", spec.family()))?;
            let found = tk::random_search_sup(&a, |b| norm(b), 10, 3000, &mut rng);
            let ratio = found / direct;
            ensure(ratio <= 1.0 + 1e-6 && ratio >= 0.95, || {
                format!("{}: random search {found} vs dual {direct}", spec.family())
            })?;
            worst_ratio = worst_ratio.min(ratio);
        }
    }
    Ok(format!("draws equal the dual norm; random search reaches >= {:.3} of it", worst_ratio))
}

fn options() -> ExperimentOptions {
    ExperimentOptions {
        test_size: 5000,
        mc_samples: 20000,
        ..Default::default()
    }
}

/// Tunes the weight constant of `make(c)` over `candidates` by mean excess
/// risk on a held-out master seed; returns the chosen constant.
fn tune(
    design: &SyntheticSpec,
    candidates: &[f64],
    make: impl Fn(f64) -> PenaltyRecipe,
    replicates: usize,
    held_out_seed: u64,
) -> f64 {
    let recipes: Vec<PenaltyRecipe> = candidates.iter().map(|&c| make(c)).collect();
    let table = scaling_experiment(std::slice::from_ref(design), &recipes, replicates, held_out_seed, &options()).unwrap();
    let agg = table.aggregate();
    let best = agg
        .iter()
        .min_by(|a, b| a.mean_excess_risk.total_cmp(&b.mean_excess_risk))
        .unwrap();
    candidates[best.penalty_index]
}

fn group_slope_recipe(c0: f64) -> PenaltyRecipe {
    PenaltyRecipe {
        name: Some(format!("group-slope c0={c0}")),
        ..PenaltyRecipe::new(PenaltyFamily::GroupSlope, WeightConfig { c0, ..Default::default() })
    }
}

fn sparse_group_recipe(c: f64) -> PenaltyRecipe {
    PenaltyRecipe {
        name: Some(format!("sparse-group-slope c={c}")),
        ..PenaltyRecipe::new(
            PenaltyFamily::SparseGroupSlope,
            WeightConfig {
                c1: c,
                c2: c,
                ..Default::default()
            },
        )
    }
}

fn nuclear_recipe(c: f64) -> PenaltyRecipe {
    PenaltyRecipe {
        name: Some(format!("nuclear c={c}")),
        ..PenaltyRecipe::new(
            PenaltyFamily::Nuclear,
            WeightConfig {
                c_nuclear: c,
                ..Default::default()
            },
        )
    }
}

const C0_GRID: [f64; 6] = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
const SCALE_GRID: [f64; 6] = [0.0625, 0.125, 0.25, 0.5, 1.0, 2.0];
const HELD_OUT_SEED: u64 = 0x5eed_0001;
const MASTER_SEED: u64 = 0x5eed_1000;

fn per_replicate_excess(table: &ExperimentTable, penalty_index: usize) -> Vec<f64> {
    table
        .rows
        .iter()
        .filter(|r| r.penalty_index == penalty_index)
        .map(|r| r.excess_risk.expect("fit failed"))
        .collect()
}

fn rate_exponent() -> Outcome {
    let start = Instant::now();
    let n_grid = [250, 500, 1000, 2000, 4000];
    let base = gaussian_design(250, 60, 4, Structure::GlobalRowSparse { d0: 4 }, 0);
    let c0 = tune(&SyntheticSpec { n: 1000, ..base.clone() }, &C0_GRID, group_slope_recipe, 10, HELD_OUT_SEED);
    let grid: Vec<SyntheticSpec> = n_grid.iter().map(|&n| SyntheticSpec { n, ..base.clone() }).collect();
    let table = scaling_experiment(&grid, &[group_slope_recipe(c0)], 30, MASTER_SEED, &options()).unwrap();
    ensure(table.rows.iter().all(|r| r.error.is_none()), || "a fit failed".into())?;
    let agg = table.aggregate();
    let means: Vec<f64> = agg.iter().map(|a| a.mean_excess_risk).collect();
    let decreasing = means.windows(2).filter(|w| w[1] < w[0]).count();
    let slope = table.plot_data()[0].fitted_slope.ok_or("no slope")?;
    let elapsed = start.elapsed();
    let detail = format!(
        "c0 = {c0}, slope {slope:.3}, mean excess {}, {decreasing}/{} doublings decrease, {:.0} s",
        means.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(" "),
        means.len() - 1,
        elapsed.as_secs_f64()
    );
    ensure((-0.75..=-0.30).contains(&slope), || format!("slope outside [-0.75, -0.30]: {detail}"))?;
    ensure(elapsed < Duration::from_secs(15 * 60), || format!("too slow: {detail}"))?;
    Ok(detail)
}

/// One-sided paired t-test of `mean(a - b) < 0`; returns (mean difference, p-value).
fn paired_less(a: &[f64], b: &[f64]) -> (f64, f64) {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / m;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let t = mean / (var / m).sqrt();
    let p = StudentsT::new(0.0, 1.0, m - 1.0).unwrap().cdf(t);
    (mean, p)
}

fn compare(
    design: &SyntheticSpec,
    candidate: (&[f64], fn(f64) -> PenaltyRecipe),
    baseline: (&[f64], fn(f64) -> PenaltyRecipe),
) -> Result<(f64, f64, f64, f64), String> {
    let c_cand = tune(design, candidate.0, candidate.1, 5, HELD_OUT_SEED);
    let c_base = tune(design, baseline.0, baseline.1, 5, HELD_OUT_SEED);
    let recipes = [candidate.1(c_cand), baseline.1(c_base)];
    let table = scaling_experiment(std::slice::from_ref(design), &recipes, 30, MASTER_SEED, &options()).unwrap();
    ensure(table.rows.iter().all(|r| r.error.is_none()), || "a fit failed".into())?;
    let (diff, p) = paired_less(&per_replicate_excess(&table, 0), &per_replicate_excess(&table, 1));
    Ok((c_cand, c_base, diff, p))
}

fn structure_ordering() -> Outcome {
    let double = gaussian_design(1500, 60, 12, Structure::DoubleRowSparse { d0: 4, m: vec![2; 4] }, 0);
    let (c_sgs, c_gs, diff_a, p_a) = compare(&double, (&SCALE_GRID, sparse_group_recipe), (&C0_GRID, group_slope_recipe))?;
    let low_rank = gaussian_design(2000, 30, 10, Structure::LowRank { r0: 2 }, 0);
    let (c_nuc, c_gs2, diff_b, p_b) = compare(&low_rank, (&SCALE_GRID, nuclear_recipe), (&C0_GRID, group_slope_recipe))?;
    let detail = format!(
        "double sparse: sparse group (c={c_sgs}) minus group (c0={c_gs}) {diff_a:.4}, p = {p_a:.2e}; \
         low rank: nuclear (c={c_nuc}) minus group (c0={c_gs2}) {diff_b:.4}, p = {p_b:.2e}"
    );
    ensure(p_a < 0.05 && p_b < 0.05, || detail.clone())?;
    Ok(detail)
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mslope"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn same_csvs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut count = 0;
    for entry in std::fs::read_dir(a).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().is_some_and(|e| e == "csv" || e == "json") {
            let name = path.file_name().unwrap();
            let left = std::fs::read(&path).map_err(|e| e.to_string())?;
            let right = std::fs::read(b.join(name)).map_err(|e| format!("{}: {e}", name.to_string_lossy()))?;
            ensure(left == right, || format!("{} differs", name.to_string_lossy()))?;
            count += 1;
        }
    }
    Ok(count)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let p = |name: &str| root.join(name).to_string_lossy().into_owned();

    let (data, _) = generate(&gaussian_design(150, 6, 3, Structure::GlobalRowSparse { d0: 2 }, 3)).unwrap();
    mslope::io::write_dataset_csv(root.join("data.csv"), &data).map_err(|e| e.to_string())?;
    let design = "[design]\nn = 200\nd = 12\nL = 3\nstructure = { kind = \"global-row-sparse\", d0 = 2 }\n";
    let configs = [
        ("simulate", format!("seed = 5\n{design}[experiment]\ntest_size = 1000\nmc_samples = 1000\n")),
        (
            "scaling",
            format!(
                "seed = 6\nreplicates = 3\nn_values = [100, 200]\n{design}\
                 [[penalties]]\nfamily = \"group-slope\"\n[[penalties]]\nfamily = \"nuclear\"\n\
                 [experiment]\ntest_size = 1000\nmc_samples = 1000\n"
            ),
        ),
        ("rademacher", "seed = 7\nnum_draws = 50\n[features]\nn = 100\nd = 8\nL = 3\n".to_string()),
    ];

    run_cli(&["fit", "--data", &p("data.csv"), "--out-dir", &p("fit1"), "--penalty", "sparse-group-slope"])?;
    run_cli(&["fit", "--config", &p("fit1/config.resolved.toml"), "--out-dir", &p("fit2")])?;
    let mut compared = same_csvs(&root.join("fit1"), &root.join("fit2"))?;
    for (cmd, text) in &configs {
        let cfg = p(&format!("{cmd}.toml"));
        std::fs::write(&cfg, text).map_err(|e| e.to_string())?;
        let (first, second) = (p(&format!("{cmd}1")), p(&format!("{cmd}2")));
        run_cli(&[cmd, "--config", &cfg, "--out-dir", &first])?;
        run_cli(&[cmd, "--config", &format!("{first}/config.resolved.toml"), "--out-dir", &second])?;
        compared += same_csvs(Path::new(&first), Path::new(&second))?;
    }
    let scaling = p("scaling.toml");
    run_cli(&["scaling", "--config", &scaling, "--threads", "1", "--out-dir", &p("t1")])?;
    run_cli(&["scaling", "--config", &scaling, "--threads", "8", "--out-dir", &p("t8")])?;
    compared += same_csvs(&root.join("t1"), &root.join("t8"))?;
    Ok(format!("{compared} output files byte-identical across reruns and thread counts"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("gradient correctness", gradient_correctness),
        ("prox oracle equivalence", prox_oracle_equivalence),
        ("prox properties", prox_properties),
        ("sparse group Lasso closed form", sparse_group_lasso_closed_form),
        ("zero row means without centering", zero_row_mean),
        ("nuclear norm under centering", nuclear_centering),
        ("solver optimality", solver_optimality),
        ("dual norm and Rademacher consistency", dual_rademacher_consistency),
        ("rate exponent", rate_exponent),
        ("structure ordering", structure_ordering),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS criterion {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
