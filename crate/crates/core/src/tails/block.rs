//! Numerical check of the block decomposition `B_i = X_i + (B_i − X_i)` on
//! the renewal chain, with `X_i = E(B_i | F_{(i−2)t})`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::bounds::{block_parameters, BlockParams};
use crate::chains::RenewalLaw;
use crate::mixing::FiniteKernel;
use crate::rng::RngStream;
use crate::special::sqrt;
use crate::tails::{ChunkRunner, TailRun};
use crate::{Error, Result};

/// Truncation leakage above which the report carries a warning.
pub const LEAKAGE_TOL: f64 = 1e-6;

/// Conditioning states are grouped as `0, 1, 2, 3, ≥ 4`.
pub const STATE_BUCKETS: usize = 5;

/// A mean over independent paths with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanSe {
    fn from_sums(s1: f64, s2: f64, m: f64) -> Self {
        let mean = s1 / m;
        let var = ((s2 / m - mean * mean) * m / (m - 1.0)).max(0.0);
        Self { mean, stderr: sqrt(var / m) }
    }

    /// `|mean| ≤ k · stderr` (an exact zero always passes).
    pub fn within(&self, k: f64) -> bool {
        self.mean.abs() <= k * self.stderr || self.mean == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub params: BlockParams,
    pub paths: u64,
    /// `‖f‖∞` of the centered observable.
    pub f_inf: f64,
    /// `2‖f‖∞ t`.
    pub cap: f64,
    pub max_abs_x: f64,
    /// Paths on which some `|X_i|` exceeded the cap.
    pub cap_violations: u64,
    /// Per-path average of `X_i`, averaged over paths.
    pub mean_x: MeanSe,
    /// Per-path average of `B_i − X_i`.
    pub residual: MeanSe,
    /// Per-path average of `(B_i − X_i) 1{Y_{(i−2)t} ∈ bucket}`.
    pub residual_by_state: Vec<MeanSe>,
    pub warnings: Vec<String>,
}

/// `H(s) = Σ_{m=t+1}^{2t} Kᵐf(s)` for every state `s ≤ 2t`; larger states
/// give `t·f(1)`.
struct ConditionalBlockMean {
    values: Vec<f64>,
    far: f64,
}

impl ConditionalBlockMean {
    fn new(kernel: &FiniteKernel, f: &[f64], t: usize) -> Self {
        // g[m] = Kᵐf(0) through truncated-kernel powers
        let mut g = Vec::with_capacity(2 * t + 1);
        let mut cur = f.to_vec();
        let mut next = vec![0.0; cur.len()];
        g.push(cur[0]);
        for _ in 0..2 * t {
            kernel.apply(&cur, &mut next);
            core::mem::swap(&mut cur, &mut next);
            g.push(cur[0]);
        }
        let off = f[1];
        // from s > 0 the chain descends for s steps, then restarts at 0
        let kmf = |m: usize, s: usize| if m < s { off } else { g[m - s] };
        let values = (0..=2 * t).map(|s| (t + 1..=2 * t).map(|m| kmf(m, s)).sum()).collect();
        Self { values, far: t as f64 * off }
    }

    fn at(&self, s: usize) -> f64 {
        self.values.get(s).copied().unwrap_or(self.far)
    }
}

/// Simulates `trials` stationary paths of the truncated renewal chain from
/// time `−t` to `n`, materializes `B_i` and `X_i` for `i = 1..n_t`, and
/// reports the sup-norm cap and the centering residuals.
pub fn block_check<C: ChunkRunner>(law: &RenewalLaw, x: f64, run: TailRun, runner: &C) -> Result<BlockReport> {
    if run.trials < 2 || run.chunk == 0 {
        return Err(Error::Usage("block check needs at least 2 paths".into()));
    }
    let kernel = FiniteKernel::renewal(law)?;
    let pi = kernel.pi.as_ref().expect("renewal kernel has a stationary law");
    let pi0 = pi[0];
    let f: Vec<f64> = (0..kernel.len()).map(|s| if s == 0 { pi0 - 1.0 } else { pi0 }).collect();
    let f_inf = pi0.max(1.0 - pi0);
    let params = block_parameters(run.n, x, law.p, f_inf, 1.0)?;
    if !params.nontrivial() {
        return Err(Error::Usage(format!("x = {x} is in the {} regime", params.regime())));
    }
    let t = params.t as usize;
    let n_t = params.n_t as usize;
    let cap = 2.0 * f_inf * t as f64;
    let h = ConditionalBlockMean::new(&kernel, &f, t);
    let sampler = kernel.stationary_sampler().expect("renewal kernel has a stationary law");
    let chunks = run.trials.div_ceil(run.chunk) as usize;

    struct Acc {
        max_abs_x: f64,
        violations: u64,
        x: (f64, f64),
        r: (f64, f64),
        by_state: [(f64, f64); STATE_BUCKETS],
    }

    let parts = runner.map_chunks(chunks, |c| {
        let mut rng = RngStream::new(run.seed, c as u64).generator();
        let lo = c as u64 * run.chunk;
        let count = (lo + run.chunk).min(run.trials) - lo;
        let mut acc = Acc { max_abs_x: 0.0, violations: 0, x: (0.0, 0.0), r: (0.0, 0.0), by_state: [(0.0, 0.0); STATE_BUCKETS] };
        // states at times −t, …, n_t·t
        let len = t * (n_t + 1) + 1;
        let mut states = vec![0usize; len];
        for _ in 0..count {
            let mut s = sampler.sample(&mut rng);
            for slot in states.iter_mut() {
                *slot = s;
                s = kernel.sample_row(s, &mut rng);
            }
            let (mut sx, mut sr) = (0.0, 0.0);
            let mut bucket = [0.0; STATE_BUCKETS];
            let mut path_max = 0.0f64;
            for i in 1..=n_t {
                // Y_{(i−2)t} sits at index (i−1)t; block i covers times (i−1)t+1 ..= it
                let cond = states[(i - 1) * t];
                let xi = h.at(cond);
                let b: f64 = states[i * t + 1..=(i + 1) * t].iter().map(|&s| f[s]).sum();
                path_max = path_max.max(xi.abs());
                sx += xi;
                sr += b - xi;
                bucket[cond.min(STATE_BUCKETS - 1)] += b - xi;
            }
            acc.max_abs_x = acc.max_abs_x.max(path_max);
            if path_max > cap {
                acc.violations += 1;
            }
            let m = n_t as f64;
            acc.x.0 += sx / m;
            acc.x.1 += (sx / m) * (sx / m);
            acc.r.0 += sr / m;
            acc.r.1 += (sr / m) * (sr / m);
            for (a, v) in acc.by_state.iter_mut().zip(bucket) {
                a.0 += v / m;
                a.1 += (v / m) * (v / m);
            }
        }
        acc
    });
    let mut total = Acc { max_abs_x: 0.0, violations: 0, x: (0.0, 0.0), r: (0.0, 0.0), by_state: [(0.0, 0.0); STATE_BUCKETS] };
    for p in parts {
        total.max_abs_x = total.max_abs_x.max(p.max_abs_x);
        total.violations += p.violations;
        total.x.0 += p.x.0;
        total.x.1 += p.x.1;
        total.r.0 += p.r.0;
        total.r.1 += p.r.1;
        for (a, b) in total.by_state.iter_mut().zip(p.by_state) {
            a.0 += b.0;
            a.1 += b.1;
        }
    }
    let m = run.trials as f64;
    let mut warnings = Vec::new();
    if law.tail_tol > LEAKAGE_TOL {
        warnings.push(format!("truncation leakage {:.3e} exceeds {LEAKAGE_TOL:e}", law.tail_tol));
    }
    Ok(BlockReport {
        params,
        paths: run.trials,
        f_inf,
        cap,
        max_abs_x: total.max_abs_x,
        cap_violations: total.violations,
        mean_x: MeanSe::from_sums(total.x.0, total.x.1, m),
        residual: MeanSe::from_sums(total.r.0, total.r.1, m),
        residual_by_state: total.by_state.iter().map(|(a, b)| MeanSe::from_sums(*a, *b, m)).collect(),
        warnings,
    })
}
