//! Hard and quadratically regularized (soft) sorting.
//!
//! The soft sort is the Euclidean projection of `rho / eps` onto the
//! permutahedron of the input, with `rho = (L, L-1, ..., 1)`. After sorting the
//! input, the projection reduces to a non-increasing isotonic regression that
//! pool-adjacent-violators solves exactly in linear time, so the forward pass
//! costs `O(L log L)` and the Jacobian is a block-averaging operator over the
//! resulting pools.
//!
//! Everything here works with the ascending convention `Sort(v) = -s(-v)`.

use std::cmp::Ordering;

use crate::error::{invalid, Result};

/// Output of [`hard_sort`].
#[derive(Debug, Clone, PartialEq)]
pub struct SortResult {
    /// Input values in ascending order.
    pub values: Vec<f64>,
    /// `values[k] == input[permutation[k]]`.
    pub permutation: Vec<usize>,
}

/// Output of [`soft_sort`], with enough state to apply the Jacobian in `O(L)`.
#[derive(Debug, Clone)]
pub struct SoftSortResult {
    /// Soft-sorted values, ascending.
    pub values: Vec<f64>,
    permutation: Vec<usize>,
    /// Half-open `[start, end)` ranges over sorted positions.
    pools: Vec<(usize, usize)>,
    /// Pool index of every sorted position.
    pool_of: Vec<usize>,
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return invalid("cannot sort an empty vector");
    }
    if let Some(i) = v.iter().position(|x| x.is_nan()) {
        return invalid(format!("NaN entry at index {i}"));
    }
    Ok(())
}

fn ascending_permutation(v: &[f64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..v.len()).collect();
    // stable sort keeps ties in source order
    perm.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(Ordering::Equal));
    perm
}

/// Sorts ascending with ties broken by source index.
pub fn hard_sort(v: &[f64]) -> Result<SortResult> {
    check_finite(v)?;
    let permutation = ascending_permutation(v);
    let values = permutation.iter().map(|&i| v[i]).collect();
    Ok(SortResult { values, permutation })
}

/// Regularized ascending sort with strength `eps > 0`.
pub fn soft_sort(v: &[f64], eps: f64) -> Result<SoftSortResult> {
    check_finite(v)?;
    if !(eps > 0.0) || !eps.is_finite() {
        return invalid(format!("soft sort regularization must be positive, got {eps}"));
    }
    let n = v.len();
    let permutation = ascending_permutation(v);
    let sorted: Vec<f64> = permutation.iter().map(|&i| v[i]).collect();

    // Target of the isotonic fit: u_k = rho_k / eps + a_k, which must be made
    // non-increasing. rho_k = n - k for 0-based k.
    let anchor = |k: usize| (n - k) as f64 / eps;

    // Blocks of (sum of u, count, start).
    let mut blocks: Vec<(f64, usize, usize)> = Vec::with_capacity(n);
    for (k, &a) in sorted.iter().enumerate() {
        blocks.push((anchor(k) + a, 1, k));
        while blocks.len() > 1 {
            let (s1, c1, _) = blocks[blocks.len() - 1];
            let (s0, c0, _) = blocks[blocks.len() - 2];
            // violation of non-increasing order: mean0 < mean1
            if s0 * (c1 as f64) < s1 * (c0 as f64) {
                blocks.pop();
                let last = blocks.last_mut().expect("two blocks present");
                last.0 += s1;
                last.1 += c1;
            } else {
                break;
            }
        }
    }

    let mut values = vec![0.0; n];
    let mut pools = Vec::with_capacity(blocks.len());
    let mut pool_of = vec![0; n];
    for (p, &(_, count, start)) in blocks.iter().enumerate() {
        let end = start + count;
        if count == 1 {
            values[start] = sorted[start];
        } else {
            // value_k = mean(a_B) + (mean(rho_B) - rho_k) / eps, written without
            // forming the large anchors to avoid cancellation.
            let mean_a = sorted[start..end].iter().sum::<f64>() / count as f64;
            let mean_rho = (start..end).map(|k| (n - k) as f64).sum::<f64>() / count as f64;
            for k in start..end {
                values[k] = mean_a + (mean_rho - (n - k) as f64) / eps;
            }
        }
        for slot in &mut pool_of[start..end] {
            *slot = p;
        }
        pools.push((start, end));
    }

    Ok(SoftSortResult { values, permutation, pools, pool_of })
}

impl SoftSortResult {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Source index of the input element at each sorted position.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Pools of the isotonic fit as `[start, end)` ranges of sorted positions.
    pub fn pools(&self) -> &[(usize, usize)] {
        &self.pools
    }

    /// Jacobian-vector product: maps an input tangent to an output tangent.
    pub fn jvp(&self, tangent: &[f64]) -> Vec<f64> {
        let gathered: Vec<f64> = self.permutation.iter().map(|&i| tangent[i]).collect();
        let mut out = vec![0.0; gathered.len()];
        for &(start, end) in &self.pools {
            let mean = gathered[start..end].iter().sum::<f64>() / (end - start) as f64;
            out[start..end].iter_mut().for_each(|o| *o = mean);
        }
        out
    }

    /// Vector-Jacobian product: maps an output cotangent back to the input.
    pub fn vjp(&self, cotangent: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; cotangent.len()];
        for &(start, end) in &self.pools {
            let mean = cotangent[start..end].iter().sum::<f64>() / (end - start) as f64;
            for k in start..end {
                out[self.permutation[k]] = mean;
            }
        }
        out
    }

    /// Sparse gradient of output `k` with respect to the input, as
    /// `(input index, weight)` pairs.
    pub fn row(&self, k: usize) -> Vec<(usize, f64)> {
        let (start, end) = self.pools[self.pool_of[k]];
        let w = 1.0 / (end - start) as f64;
        (start..end).map(|j| (self.permutation[j], w)).collect()
    }
}

/// 1-based order-statistic index `ceil(p L)` used for the level-`p` quantile.
pub fn order_index(p: f64, len: usize) -> usize {
    // guard against p*L landing a rounding error above an integer
    let raw = (p * len as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(len)
}

/// Empirical quantile together with its sparse input gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileEstimate {
    pub value: f64,
    /// `(input index, d value / d input)` pairs; all other entries are zero.
    pub weights: Vec<(usize, f64)>,
}

/// The `ceil(p L)`-th order statistic of `v`; hard for `eps == 0`, soft otherwise.
pub fn empirical_quantile(v: &[f64], p: f64, eps: f64) -> Result<QuantileEstimate> {
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("probability level must lie in (0, 1), got {p}"));
    }
    if eps < 0.0 || eps.is_nan() {
        return invalid(format!("regularization must be non-negative, got {eps}"));
    }
    let k = order_index(p, v.len().max(1)) - 1;
    if eps == 0.0 {
        let sorted = hard_sort(v)?;
        Ok(QuantileEstimate {
            value: sorted.values[k],
            weights: vec![(sorted.permutation[k], 1.0)],
        })
    } else {
        let soft = soft_sort(v, eps)?;
        Ok(QuantileEstimate { value: soft.values[k], weights: soft.row(k) })
    }
}
