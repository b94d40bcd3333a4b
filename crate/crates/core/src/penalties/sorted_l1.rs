//! Sorted-l1 (Slope) norm and its proximal operator.

use crate::error::{Error, Result};

/// Checks `w_1 >= ... >= w_k >= 0`. Zero weights are allowed here so that the
/// prox degenerates gracefully to the identity.
pub(crate) fn check_prox_weights(weights: &[f64]) -> Result<()> {
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::invalid(format!("prox weights must be finite and nonnegative, found {w}")));
    }
    if weights.windows(2).any(|p| p[1] > p[0]) {
        return Err(Error::invalid("prox weights must be nonincreasing"));
    }
    Ok(())
}

pub(crate) fn check_step(step: f64) -> Result<()> {
    if step.is_finite() && step >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("step must be finite and nonnegative, got {step}")))
    }
}

/// Indices ordering `|v|` descending; equal magnitudes keep their original order.
pub(crate) fn descending_order(v: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    order
}

/// `sum_j w_j |v|_(j)`.
pub fn sorted_l1_norm(v: &[f64], weights: &[f64]) -> f64 {
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.iter().zip(weights).map(|(m, w)| m * w).sum()
}

/// Dual of the sorted-l1 norm: `max_k (sum_{j<=k} |v|_(j)) / (sum_{j<=k} w_j)`.
pub fn sorted_l1_dual(v: &[f64], weights: &[f64]) -> f64 {
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut num = 0.0;
    let mut den = 0.0;
    let mut best = 0.0f64;
    for (m, w) in mags.iter().zip(weights) {
        num += m;
        den += w;
        if den > 0.0 {
            best = best.max(num / den);
        } else if num > 0.0 {
            return f64::INFINITY;
        }
    }
    best
}

/// `argmin_u 1/2 |u - v|^2 + step * sum_j w_j |u|_(j)`.
///
/// Stack-based pool-adjacent-violators on the sorted, shifted magnitudes
/// `|v|_(j) - step w_j`: adjacent blocks are merged to their average while
/// a later block exceeds an earlier one, the result is clamped at zero and
/// mapped back through the sort permutation and the signs of `v`.
pub fn prox_sorted_l1(v: &[f64], weights: &[f64], step: f64) -> Result<Vec<f64>> {
    Error::check_dim("number of weights", v.len(), weights.len())?;
    check_prox_weights(weights)?;
    check_step(step)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("prox input has non-finite entries"));
    }
    Ok(prox_sorted_l1_unchecked(v, weights, step))
}

pub(crate) fn prox_sorted_l1_unchecked(v: &[f64], weights: &[f64], step: f64) -> Vec<f64> {
    let k = v.len();
    let order = descending_order(v);

    // (first index, length, sum)
    let mut blocks: Vec<(usize, usize, f64)> = Vec::with_capacity(k);
    for (pos, &idx) in order.iter().enumerate() {
        let z = v[idx].abs() - step * weights[pos];
        blocks.push((pos, 1, z));
        while blocks.len() > 1 {
            let (_, len_top, sum_top) = blocks[blocks.len() - 1];
            let (start, len_prev, sum_prev) = blocks[blocks.len() - 2];
            if sum_top / len_top as f64 > sum_prev / len_prev as f64 {
                blocks.pop();
                let last = blocks.len() - 1;
                blocks[last] = (start, len_prev + len_top, sum_prev + sum_top);
            } else {
                break;
            }
        }
    }

    let mut out = vec![0.0; k];
    for (start, len, sum) in blocks {
        let value = (sum / len as f64).max(0.0);
        for &idx in &order[start..start + len] {
            out[idx] = if v[idx] < 0.0 { -value } else { value };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_are_identity() {
        let v = [3.0, -1.0, 0.5];
        assert_eq!(prox_sorted_l1(&v, &[0.0; 3], 1.0).unwrap(), v.to_vec());
    }

    #[test]
    fn equal_weights_soft_threshold() {
        assert_eq!(prox_sorted_l1(&[3.0, 1.0], &[2.0, 2.0], 1.0).unwrap(), vec![1.0, 0.0]);
        assert_eq!(prox_sorted_l1(&[-3.0, 2.5], &[1.0, 1.0], 0.5).unwrap(), vec![-2.5, 2.0]);
    }

    #[test]
    fn pooling_of_violators() {
        // shifted magnitudes (0.0, 0.8) violate the order and pool to 0.4
        let u = prox_sorted_l1(&[1.0, 0.9], &[1.0, 0.1], 1.0).unwrap();
        assert!((u[0] - 0.4).abs() < 1e-15 && (u[1] - 0.4).abs() < 1e-15, "{u:?}");
    }

    #[test]
    fn rejects_increasing_weights() {
        assert!(prox_sorted_l1(&[1.0, 2.0], &[0.1, 0.2], 1.0).is_err());
        assert!(prox_sorted_l1(&[1.0, 2.0], &[0.2], 1.0).is_err());
        assert!(prox_sorted_l1(&[1.0], &[0.2], -1.0).is_err());
    }

    #[test]
    fn dual_of_sorted_norm() {
        assert_eq!(sorted_l1_dual(&[1.0, 1.0], &[1.0, 1.0]), 1.0);
        assert_eq!(sorted_l1_dual(&[2.0, 0.0], &[1.0, 1.0]), 2.0);
        assert!((sorted_l1_dual(&[1.0, 1.0], &[2.0, 0.5]) - 0.8).abs() < 1e-15);
        assert_eq!(sorted_l1_norm(&[-1.0, 3.0], &[2.0, 1.0]), 7.0);
    }
}
