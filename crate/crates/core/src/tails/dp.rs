//! Exact tails of sums of i.i.d. positive integer variables.

use alloc::format;
use alloc::vec;

use crate::error::domain;
use crate::{Error, Result};

/// Largest `n · K` accepted by [`dp_sum_tail`].
pub const MAX_WORK: u64 = 10_000_000;

/// `P(τ₀ + … + τ_{n−1} ≥ threshold)` for i.i.d. `τᵢ` with
/// `P(τ = k) = pmf[k − 1]` on `{1, …, K}`.
///
/// The partial-sum law is convolved `n` times on `{0, …, threshold}` with
/// the last cell absorbing every sum at or above the threshold.
pub fn dp_sum_tail(pmf: &[f64], n: u64, threshold: u64) -> Result<f64> {
    let k = pmf.len() as u64;
    if k == 0 {
        return Err(domain!("pmf must not be empty"));
    }
    if pmf.iter().any(|w| !(*w >= 0.0)) {
        return Err(domain!("pmf entries must be nonnegative"));
    }
    let mass: f64 = pmf.iter().sum();
    if (mass - 1.0).abs() > 1e-12 {
        return Err(domain!("pmf sums to {mass}, not 1"));
    }
    if n.checked_mul(k).is_none_or(|w| w > MAX_WORK) {
        return Err(Error::Size(format!("n·K = {n}·{k} exceeds {MAX_WORK}")));
    }
    if threshold <= n {
        return Ok(1.0);
    }
    if threshold > n * k {
        return Ok(0.0);
    }
    let cap = threshold as usize;
    let mut cur = vec![0.0; cap + 1];
    let mut next = vec![0.0; cap + 1];
    cur[0] = 1.0;
    for _ in 0..n {
        next.iter_mut().for_each(|v| *v = 0.0);
        next[cap] = cur[cap];
        for (s, &w) in cur[..cap].iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (j, &q) in pmf.iter().enumerate() {
                let t = (s + j + 1).min(cap);
                next[t] += w * q;
            }
        }
        core::mem::swap(&mut cur, &mut next);
    }
    Ok(cur[cap])
}
