//! Slow, direct reference computations for the mslope test suites.
//!
//! Nothing here calls into `mslope`; every routine works on plain nalgebra
//! types so that tests compare two independent implementations.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type TestRng = ChaCha8Rng;

pub fn test_rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal draw (Box-Muller).
pub fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn normal_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

/// Nonincreasing positive weights drawn at random, largest near `scale`.
pub fn random_weights(len: usize, scale: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len).map(|_| scale * (0.05 + rng.random::<f64>())).collect();
    w.sort_by(|a, b| b.total_cmp(a));
    w
}

// ---------------------------------------------------------------------------
// likelihood

/// `(1/n) sum_i [log sum_l exp(beta_l^T x_i) - beta_{y_i}^T x_i]`, loop by loop.
pub fn direct_nll(b: &DMatrix<f64>, x: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let (n, d) = x.shape();
    let l = b.ncols();
    let mut total = 0.0;
    for i in 0..n {
        let mut scores = vec![0.0; l];
        for (k, s) in scores.iter_mut().enumerate() {
            for j in 0..d {
                *s += x[(i, j)] * b[(j, k)];
            }
        }
        let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + scores.iter().map(|s| (s - top).exp()).sum::<f64>().ln();
        total += lse - scores[labels[i]];
    }
    total / n as f64
}

/// Class probabilities at one feature vector.
pub fn direct_probs(b: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let l = b.ncols();
    let scores: Vec<f64> = (0..l).map(|k| (0..x.len()).map(|j| x[j] * b[(j, k)]).sum()).collect();
    let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Average of `sum_l p1_l ln(p1_l / p2_l)` over the rows of `x`.
pub fn direct_kl(b1: &DMatrix<f64>, b2: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for i in 0..x.nrows() {
        let row: Vec<f64> = x.row(i).iter().cloned().collect();
        let p = direct_probs(b1, &row);
        let q = direct_probs(b2, &row);
        total += p.iter().zip(&q).map(|(a, b)| if *a > 0.0 { a * (a / b).ln() } else { 0.0 }).sum::<f64>();
    }
    total / x.nrows() as f64
}

/// Central differences with one Richardson extrapolation step.
pub fn finite_difference_gradient(f: impl Fn(&DMatrix<f64>) -> f64, b: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let central = |idx: (usize, usize), h: f64| {
        let mut plus = b.clone();
        let mut minus = b.clone();
        plus[idx] += h;
        minus[idx] -= h;
        (f(&plus) - f(&minus)) / (2.0 * h)
    };
    DMatrix::from_fn(b.nrows(), b.ncols(), |j, k| {
        let coarse = central((j, k), h);
        let fine = central((j, k), h / 2.0);
        (4.0 * fine - coarse) / 3.0
    })
}

/// Unpenalized multinomial MLE by damped Newton, with the last class as
/// reference, returned with rows centered. Panics if Newton fails, which
/// for the tests means the instance is separable.
pub fn newton_mle(x: &DMatrix<f64>, labels: &[usize], num_classes: usize) -> DMatrix<f64> {
    let (n, d) = x.shape();
    let m = num_classes - 1;
    let p_len = d * m;
    let embed = |theta: &DVector<f64>| {
        DMatrix::from_fn(d, num_classes, |j, k| if k < m { theta[j * m + k] } else { 0.0 })
    };
    let objective = |theta: &DVector<f64>| direct_nll(&embed(theta), x, labels);
    let mut theta = DVector::zeros(p_len);
    for _ in 0..200 {
        let b = embed(&theta);
        let mut grad = DVector::zeros(p_len);
        let mut hess = DMatrix::zeros(p_len, p_len);
        for i in 0..n {
            let row: Vec<f64> = x.row(i).iter().cloned().collect();
            let p = direct_probs(&b, &row);
            for k in 0..m {
                let r = p[k] - if labels[i] == k { 1.0 } else { 0.0 };
                for j in 0..d {
                    grad[j * m + k] += row[j] * r / n as f64;
                }
                for k2 in 0..m {
                    let w = if k == k2 { p[k] - p[k] * p[k2] } else { -p[k] * p[k2] };
                    for j in 0..d {
                        for j2 in 0..d {
                            hess[(j * m + k, j2 * m + k2)] += row[j] * row[j2] * w / n as f64;
                        }
                    }
                }
            }
        }
        if grad.norm() < 1e-13 {
            break;
        }
        let step = hess.cholesky().expect("Hessian must be positive definite").solve(&grad);
        let f0 = objective(&theta);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        loop {
            let trial = &theta - &step * t;
            if objective(&trial) <= f0 - 1e-4 * t * slope || t < 1e-12 {
                theta = trial;
                break;
            }
            t *= 0.5;
        }
    }
    let b = embed(&theta);
    let mut centered = b.clone();
    for j in 0..d {
        let mean = b.row(j).sum() / num_classes as f64;
        for k in 0..num_classes {
            centered[(j, k)] -= mean;
        }
    }
    centered
}

// ---------------------------------------------------------------------------
// linear algebra

/// Eigenvalues (descending) and eigenvectors (columns) of a symmetric
/// matrix by cyclic Jacobi rotations.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Singular values (descending) from the Jacobi eigenvalues of the smaller Gram matrix.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let gram = if a.nrows() >= a.ncols() { a.transpose() * a } else { a * a.transpose() };
    jacobi_eigen(&gram).0.into_iter().map(|v| v.max(0.0).sqrt()).collect()
}

/// `U V^T` over the singular pairs with `sigma > tol * sigma_max` (a
/// subgradient of the nuclear norm at `a`).
pub fn polar_factor(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (values, vectors) = jacobi_eigen(&(a.transpose() * a));
    let top = values.first().cloned().unwrap_or(0.0).max(0.0).sqrt();
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for (k, &ev) in values.iter().enumerate() {
        let sigma = ev.max(0.0).sqrt();
        if sigma <= tol * top || sigma == 0.0 {
            continue;
        }
        let v = vectors.column(k).into_owned();
        let u = (a * &v) / sigma;
        out += u * v.transpose();
    }
    out
}

// ---------------------------------------------------------------------------
// norms written out directly, with their maximizing dual atoms

fn sorted_desc_abs(v: &[f64]) -> Vec<(usize, f64)> {
    let mut idx: Vec<(usize, f64)> = v.iter().map(|x| x.abs()).enumerate().collect();
    idx.sort_by(|a, b| b.1.total_cmp(&a.1));
    idx
}

/// `sum_j w_j |v|_(j)`.
pub fn slope_norm(v: &[f64], w: &[f64]) -> f64 {
    sorted_desc_abs(v).iter().zip(w).map(|((_, a), w)| a * w).sum()
}

/// A maximizer of `<u, v>` over the unit dual ball of the Slope norm.
pub fn slope_atom(v: &[f64], w: &[f64]) -> Vec<f64> {
    let mut u = vec![0.0; v.len()];
    for ((j, _), wj) in sorted_desc_abs(v).into_iter().zip(w) {
        u[j] = if v[j] < 0.0 { -wj } else { *wj };
    }
    u
}

fn row_norms(b: &DMatrix<f64>) -> Vec<f64> {
    b.row_iter().map(|r| r.norm()).collect()
}

pub fn group_slope_norm(b: &DMatrix<f64>, lambda: &[f64]) -> f64 {
    slope_norm(&row_norms(b), lambda)
}

pub fn group_slope_atom(b: &DMatrix<f64>, lambda: &[f64]) -> DMatrix<f64> {
    let norms = row_norms(b);
    let weights = slope_atom(&norms, lambda);
    let mut u = DMatrix::zeros(b.nrows(), b.ncols());
    for j in 0..b.nrows() {
        if norms[j] > 0.0 {
            u.set_row(j, &(b.row(j) * (weights[j].abs() / norms[j])));
        } else {
            u[(j, 0)] = weights[j].abs();
        }
    }
    u
}

pub fn row_slope_norm(b: &DMatrix<f64>, kappa: &[f64]) -> f64 {
    b.row_iter()
        .map(|r| slope_norm(&r.iter().cloned().collect::<Vec<_>>(), kappa))
        .sum()
}

pub fn row_slope_atom(b: &DMatrix<f64>, kappa: &[f64]) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(b.nrows(), b.ncols());
    for j in 0..b.nrows() {
        let row: Vec<f64> = b.row(j).iter().cloned().collect();
        for (k, v) in slope_atom(&row, kappa).into_iter().enumerate() {
            u[(j, k)] = v;
        }
    }
    u
}

pub fn nuclear_norm(b: &DMatrix<f64>) -> f64 {
    singular_values(b).iter().sum()
}

// ---------------------------------------------------------------------------
// prox by minimum-norm point

/// Result of [`min_norm_prox`].
#[derive(Debug, Clone)]
pub struct ProxOracle {
    pub point: DMatrix<f64>,
    /// Frank-Wolfe gap at `point`; `|point - prox|_F <= sqrt(2 gap)`.
    pub gap: f64,
    /// Largest deviation between restarts.
    pub spread: f64,
}

/// Prox of `step * f` at `v` for a norm `f` given only through a dual-ball
/// linear maximization oracle `atom(x) = argmax_{f_*(u) <= 1} <u, x>`.
///
/// `prox(v)` is the minimum-norm point of `v - step * C` with `C` the dual
/// ball. Wolfe's algorithm is run from `restarts` random initial atoms and
/// the point of smallest norm is returned.
pub fn min_norm_prox(
    v: &DMatrix<f64>,
    step: f64,
    atom: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
    restarts: usize,
    rng: &mut impl Rng,
) -> ProxOracle {
    let (r, c) = v.shape();
    let flat = |m: &DMatrix<f64>| DVector::from_iterator(r * c, m.iter().cloned());
    let unflat = |x: &DVector<f64>| DMatrix::from_iterator(r, c, x.iter().cloned());
    let vf = flat(v);
    let lmo = |x: &DVector<f64>| -> DVector<f64> {
        // argmin over p = v - step u of <x, p> means argmax of <u, x>
        &vf - flat(&atom(&unflat(x))) * step
    };
    let mut runs = Vec::new();
    for _ in 0..restarts.max(1) {
        let start = DVector::from_fn(r * c, |_, _| normal(rng));
        runs.push(wolfe(lmo(&start), &lmo, 1e-15, 20_000));
    }
    let best = runs
        .iter()
        .min_by(|a, b| a.0.norm().total_cmp(&b.0.norm()))
        .cloned()
        .unwrap();
    let spread = runs.iter().map(|(x, _)| (x - &best.0).amax()).fold(0.0, f64::max);
    ProxOracle {
        point: unflat(&best.0),
        gap: best.1,
        spread,
    }
}

/// Wolfe's minimum-norm-point algorithm over the convex hull implicitly
/// given by `lmo(x) = argmin_p <x, p>`.
fn wolfe(first: DVector<f64>, lmo: &impl Fn(&DVector<f64>) -> DVector<f64>, tol: f64, max_iter: usize) -> (DVector<f64>, f64) {
    let mut atoms = vec![first.clone()];
    let mut weights = vec![1.0];
    let mut x = first;
    let mut gap = f64::INFINITY;
    for _ in 0..max_iter {
        let q = lmo(&x);
        gap = x.dot(&x) - x.dot(&q);
        if gap <= tol * (1.0 + x.dot(&x)) {
            break;
        }
        if atoms.iter().any(|a| (a - &q).amax() < 1e-15) {
            break;
        }
        atoms.push(q);
        weights.push(0.0);
        loop {
            let alpha = affine_minimizer(&atoms);
            if alpha.iter().all(|&a| a > 1e-14) {
                weights = alpha;
                break;
            }
            let mut theta = 1.0;
            for (w, a) in weights.iter().zip(&alpha) {
                if *a <= 1e-14 && w - a > 0.0 {
                    theta = f64::min(theta, w / (w - a));
                }
            }
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w = theta * a + (1.0 - theta) * *w;
            }
            let mut k = 0;
            let mut removed = false;
            while k < atoms.len() {
                if weights[k] <= 1e-14 {
                    atoms.remove(k);
                    weights.remove(k);
                    removed = true;
                } else {
                    k += 1;
                }
            }
            if !removed {
                // numerical stall; drop the smallest weight
                let (k, _) = weights.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
                atoms.remove(k);
                weights.remove(k);
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            if atoms.len() == 1 {
                break;
            }
        }
        x = combine(&atoms, &weights);
    }
    (x, gap.max(0.0))
}

fn combine(atoms: &[DVector<f64>], weights: &[f64]) -> DVector<f64> {
    let mut x = DVector::zeros(atoms[0].len());
    for (a, w) in atoms.iter().zip(weights) {
        x += a * *w;
    }
    x
}

/// Weights `alpha` (summing to 1) minimizing `|sum alpha_i p_i|` over the affine hull.
fn affine_minimizer(atoms: &[DVector<f64>]) -> Vec<f64> {
    let k = atoms.len();
    let mut sys = DMatrix::zeros(k + 1, k + 1);
    for i in 0..k {
        for j in 0..k {
            sys[(i, j)] = atoms[i].dot(&atoms[j]);
        }
        sys[(i, k)] = 1.0;
        sys[(k, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = sys
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .unwrap_or_else(|| sys.svd(true, true).solve(&rhs, 1e-14).expect("svd solve"));
    sol.rows(0, k).iter().cloned().collect()
}

/// Closed-form sparse group Lasso prox: entrywise soft-threshold at
/// `step * kappa`, then row-wise shrinkage at `step * lambda`.
pub fn sparse_group_lasso_prox(v: &DMatrix<f64>, lambda: f64, kappa: f64, step: f64) -> DMatrix<f64> {
    let mut out = v.map(|x| x.signum() * (x.abs() - step * kappa).max(0.0));
    for j in 0..out.nrows() {
        let norm = out.row(j).norm();
        let factor = if norm > step * lambda { 1.0 - step * lambda / norm } else { 0.0 };
        for k in 0..out.ncols() {
            out[(j, k)] *= factor;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// dual norms by search

/// Lower bound on `sup { <A, B> : f(B) <= 1 }` from random restarts and
/// hill climbing on the ratio `<A, B> / f(B)`.
pub fn random_search_sup(
    a: &DMatrix<f64>,
    norm: impl Fn(&DMatrix<f64>) -> f64,
    restarts: usize,
    steps: usize,
    rng: &mut impl Rng,
) -> f64 {
    let ratio = |b: &DMatrix<f64>| {
        let f = norm(b);
        if f > 0.0 {
            a.dot(b) / f
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut best = f64::NEG_INFINITY;
    for r in 0..restarts {
        let mut b = if r == 0 {
            a.clone()
        } else {
            normal_matrix(a.nrows(), a.ncols(), rng)
        };
        let mut value = ratio(&b);
        let mut scale = 0.5;
        for _ in 0..steps {
            let size = b.norm().max(1e-12);
            let trial = &b + normal_matrix(a.nrows(), a.ncols(), rng) * (scale * size);
            let tv = ratio(&trial);
            if tv > value {
                b = trial;
                value = tv;
            } else {
                scale = f64::max(scale * 0.97, 1e-6);
            }
        }
        // sparsify: zeroing small entries often reaches the supremum exactly
        for &cut in &[0.05, 0.2, 0.5] {
            let top = b.amax();
            let pruned = b.map(|v| if v.abs() < cut * top { 0.0 } else { v });
            value = value.max(ratio(&pruned));
        }
        best = best.max(value);
    }
    best
}
