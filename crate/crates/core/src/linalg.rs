//! Thin singular value decomposition by one-sided Jacobi rotations.
//!
//! Accurate to rounding level on rank-deficient input, where nalgebra's
//! bidiagonalization SVD is not. Intended for the small matrices used here.

use nalgebra::DMatrix;

const MAX_SWEEPS: usize = 80;

/// `B = U diag(s) V^T` with `U` (`m x k`), `V` (`n x k`), `k = min(m, n)`
/// and `s` in decreasing order. Columns of `U` for zero singular values are zero.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    /// `U diag(f(s)) V^T`.
    pub fn recompose_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.u.clone();
        for (k, &s) in self.singular_values.iter().enumerate() {
            let factor = f(s);
            scaled.column_mut(k).scale_mut(factor);
        }
        scaled * self.v.transpose()
    }
}

pub fn svd(b: &DMatrix<f64>) -> Svd {
    if b.nrows() < b.ncols() {
        let t = jacobi(&b.transpose());
        return Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    jacobi(b)
}

pub fn singular_values(b: &DMatrix<f64>) -> Vec<f64> {
    svd(b).singular_values
}

/// Requires `nrows >= ncols`.
fn jacobi(a: &DMatrix<f64>) -> Svd {
    let (m, n) = a.shape();
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dot(&u.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut u, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|k| u.column(k).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u_out = DMatrix::zeros(m, n);
    let mut v_out = DMatrix::zeros(n, n);
    let mut sv = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let s = norms[j];
        if s > 0.0 {
            u_out.set_column(k, &(u.column(j) / s));
        }
        v_out.set_column(k, &v.column(j));
        sv.push(s);
    }
    Svd {
        u: u_out,
        singular_values: sv,
        v: v_out,
    }
}

fn rotate(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let (x, y) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = c * x - s * y;
        m[(i, q)] = s * x + c * y;
    }
}
