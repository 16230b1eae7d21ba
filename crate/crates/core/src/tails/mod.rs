//! Monte-Carlo deviation probabilities with Wilson intervals, exact
//! small-instance oracles, scaling fits and constant calibration.
//!
//! Every estimator splits its trials into chunks of [`TailRun::chunk`]
//! trials; chunk `c` draws from `RngStream(seed, c)` and chunk results are
//! merged in chunk order, so the output does not depend on the
//! [`ChunkRunner`].

pub mod block;
pub mod dp;
pub mod stats;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand_core::RngCore;

use crate::chains::{
    geometric, observable_value, ChainModel, DiscreteSampler, ExcursionSample, HarrisParams, Observable,
    ObservableKind, RenewalLaw,
};
use crate::error::domain;
use crate::rng::{derive_seed, RngStream};
use crate::special::{ln, powf, sqrt};
use crate::{Error, Result};

pub use block::{block_check, BlockReport};
pub use dp::dp_sum_tail;
pub use stats::{limit_diagnostic, wilson, LimitKind, ScalingFit};

/// Schedules independent chunks of work. Implementations must return the
/// results in chunk order.
pub trait ChunkRunner: Sync {
    fn map_chunks<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Runs chunks one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl ChunkRunner for Sequential {
    fn map_chunks<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..count).map(f).collect()
    }
}

/// Default number of trials per chunk.
pub const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    /// `max_{1≤k≤n} |S_k|`.
    MaxAbsPartialSum,
    /// `|S_n|`.
    AbsSum,
    /// `Σ τᵢ` over `n` excursions.
    ExcursionSum,
    /// `|Σ wᵢ f(Yᵢ) − E|`.
    Functional,
}

impl Statistic {
    pub fn as_str(&self) -> &'static str {
        match self {
            Statistic::MaxAbsPartialSum => "max_abs_partial_sum",
            Statistic::AbsSum => "abs_sum",
            Statistic::ExcursionSum => "excursion_sum",
            Statistic::Functional => "functional",
        }
    }
}

/// One `(n, x)` cell of an empirical deviation probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub statistic: Statistic,
    pub n: u64,
    pub x: f64,
    pub hits: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl TailEstimate {
    pub fn from_hits(statistic: Statistic, n: u64, x: f64, hits: u64, trials: u64) -> Self {
        let (ci_low, ci_high) = wilson(hits, trials);
        Self { statistic, n, x, hits, trials, p_hat: hits as f64 / trials as f64, ci_low, ci_high }
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

/// Size, seed and chunking of a Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TailRun {
    pub n: u64,
    pub trials: u64,
    pub seed: u64,
    pub chunk: u64,
}

impl TailRun {
    pub fn new(n: u64, trials: u64, seed: u64) -> Self {
        Self { n, trials, seed, chunk: CHUNK }
    }

    fn validate(&self) -> Result<()> {
        if self.trials < 100 {
            return Err(Error::Usage(format!("at least 100 trials are required, got {}", self.trials)));
        }
        if self.n == 0 {
            return Err(domain!("n must be at least 1"));
        }
        if self.chunk == 0 {
            return Err(domain!("chunk size must be positive"));
        }
        Ok(())
    }

    fn chunks(&self) -> usize {
        self.trials.div_ceil(self.chunk) as usize
    }

    fn chunk_range(&self, c: usize) -> u64 {
        let lo = c as u64 * self.chunk;
        (lo + self.chunk).min(self.trials) - lo
    }
}

fn check_grid(x_grid: &[f64]) -> Result<()> {
    if x_grid.is_empty() {
        return Err(domain!("x grid is empty"));
    }
    if x_grid.iter().any(|x| x.is_nan()) || x_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(domain!("x grid must be sorted ascending"));
    }
    Ok(())
}

/// Runs `per_trial` over all trials and turns the per-trial statistic into
/// grid hit counts (`value ≥ x`).
fn grid_hits<C, F>(run: &TailRun, x_grid: &[f64], stream_seed: u64, runner: &C, per_trial: F) -> Result<Vec<u64>>
where
    C: ChunkRunner,
    F: Fn(&mut dyn RngCore) -> Result<f64> + Sync,
{
    let parts = runner.map_chunks(run.chunks(), |c| -> Result<Vec<u64>> {
        let mut rng = RngStream::new(stream_seed, c as u64).generator();
        // counts[j] = number of trials whose value clears exactly j grid points
        let mut counts = vec![0u64; x_grid.len() + 1];
        for _ in 0..run.chunk_range(c) {
            let v = per_trial(&mut rng)?;
            counts[x_grid.partition_point(|x| *x <= v)] += 1;
        }
        Ok(counts)
    });
    let mut counts = vec![0u64; x_grid.len() + 1];
    for part in parts {
        for (a, b) in counts.iter_mut().zip(part?) {
            *a += b;
        }
    }
    let mut hits = vec![0u64; x_grid.len()];
    let mut acc = 0;
    for j in (0..x_grid.len()).rev() {
        acc += counts[j + 1];
        hits[j] = acc;
    }
    Ok(hits)
}

/// Emits the centered observable along a stationary path of length `n` as
/// runs `(value, length)` of constant value.
enum PathModel<'a> {
    Renewal { law: &'a RenewalLaw, on: f64, off: f64 },
    Harris { params: &'a HarrisParams, gamma: f64, centering: f64 },
    Steps { chain: &'a ChainModel, obs: &'a Observable },
}

impl<'a> PathModel<'a> {
    fn new(chain: &'a ChainModel, obs: &'a Observable) -> Self {
        match (chain, &obs.kind) {
            (ChainModel::Renewal(law) | ChainModel::Tower(law), ObservableKind::RenewalIndicator) => {
                PathModel::Renewal { law, on: obs.centering - 1.0, off: obs.centering }
            }
            (ChainModel::Harris(params), ObservableKind::HarrisPower { gamma }) => {
                PathModel::Harris { params, gamma: *gamma, centering: obs.centering }
            }
            _ => PathModel::Steps { chain, obs },
        }
    }

    fn runs(&self, n: u64, rng: &mut dyn RngCore, mut emit: impl FnMut(f64, u64)) -> Result<()> {
        let mut t = 0u64;
        match *self {
            PathModel::Renewal { law, on, off } => {
                let mut s = law.sample_stationary(rng) as u64;
                while t < n {
                    if s > 0 {
                        let len = s.min(n - t);
                        emit(off, len);
                        t += len;
                        s = 0;
                    } else {
                        emit(on, 1);
                        t += 1;
                        if t < n {
                            s = law.sample_jump(rng) as u64;
                        }
                    }
                }
            }
            PathModel::Harris { params, gamma, centering } => {
                let mut y = params.sample_pi(rng);
                while t < n {
                    let len = geometric(y, rng).min(n - t);
                    emit(powf(y, gamma) - centering, len);
                    t += len;
                    if t < n {
                        y = params.sample_nu(rng);
                    }
                }
            }
            PathModel::Steps { chain, obs } => {
                let mut s = chain.stationary_sample(rng)?;
                while t < n {
                    emit(observable_value(obs, s)?, 1);
                    t += 1;
                    if t < n {
                        s = chain.step(s, rng)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Functional weights `w₀, …, w_{n−1}` as prefix sums.
struct Prefix(Vec<f64>);

impl Prefix {
    fn new(w: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(w.len() + 1);
        out.push(0.0);
        for v in w {
            acc += v;
            out.push(acc);
        }
        Prefix(out)
    }
}

fn trial_value(model: &PathModel<'_>, n: u64, statistic: Statistic, weights: Option<&Prefix>, rng: &mut dyn RngCore) -> Result<f64> {
    let mut s = 0.0f64;
    let mut best = 0.0f64;
    let mut pos = 0usize;
    match statistic {
        Statistic::MaxAbsPartialSum => model.runs(n, rng, |v, len| {
            s += v * len as f64;
            best = best.max(s.abs());
        })?,
        Statistic::AbsSum => {
            model.runs(n, rng, |v, len| s += v * len as f64)?;
            best = s.abs();
        }
        Statistic::Functional => {
            let w = weights.ok_or_else(|| Error::Usage("functional statistic needs weights".into()))?;
            model.runs(n, rng, |v, len| {
                let end = pos + len as usize;
                s += v * (w.0[end] - w.0[pos]);
                pos = end;
            })?;
            best = s.abs();
        }
        Statistic::ExcursionSum => {
            return Err(Error::Usage("excursion sums are estimated by excursion_sum_tail".into()))
        }
    }
    Ok(best)
}

/// Estimates `P(statistic ≥ x)` for every `x` of a sorted grid from shared
/// stationary trajectories.
pub fn mc_tail<C: ChunkRunner>(
    chain: &ChainModel,
    obs: &Observable,
    x_grid: &[f64],
    run: TailRun,
    statistic: Statistic,
    weights: Option<&[f64]>,
    runner: &C,
) -> Result<Vec<TailEstimate>> {
    run.validate()?;
    check_grid(x_grid)?;
    let prefix = match (statistic, weights) {
        (Statistic::Functional, None) => {
            return Err(Error::Usage("functional statistic without a functional spec".into()))
        }
        (Statistic::ExcursionSum, _) => {
            return Err(Error::Usage("excursion sums are estimated by excursion_sum_tail".into()))
        }
        (Statistic::Functional, Some(w)) => {
            if w.len() as u64 != run.n {
                return Err(domain!("{} weights for a path of length {}", w.len(), run.n));
            }
            if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(domain!("weights must be finite and nonnegative"));
            }
            Some(Prefix::new(w))
        }
        _ => None,
    };
    let model = PathModel::new(chain, obs);
    let hits = grid_hits(&run, x_grid, run.seed, runner, |rng| {
        trial_value(&model, run.n, statistic, prefix.as_ref(), rng)
    })?;
    Ok(x_grid
        .iter()
        .zip(hits)
        .map(|(&x, h)| TailEstimate::from_hits(statistic, run.n, x, h, run.trials))
        .collect())
}

/// Tail of a weighted additive functional together with an independent
/// estimate of its mean.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalTail {
    pub estimates: Vec<TailEstimate>,
    /// Centering used for the tail, `Σ wᵢ π(f − πf) = 0`.
    pub centering: f64,
    pub mean_estimate: f64,
    pub mean_stderr: f64,
}

/// Label mixed into the seed of the independent mean sample.
const MEAN_LABEL: u64 = 0x6d65_616e;

/// `π{|Σ wᵢ f(Yᵢ) − E| ≥ x}` for the centered observable, with `E = 0`
/// exactly; `E` is also estimated from an independent sample of the same
/// size.
pub fn young_functional_tail<C: ChunkRunner>(
    chain: &ChainModel,
    weights: &[f64],
    obs: &Observable,
    x_grid: &[f64],
    run: TailRun,
    runner: &C,
) -> Result<FunctionalTail> {
    let estimates = mc_tail(chain, obs, x_grid, run, Statistic::Functional, Some(weights), runner)?;
    let prefix = Prefix::new(weights);
    let model = PathModel::new(chain, obs);
    let mean_seed = derive_seed(run.seed, MEAN_LABEL);
    let parts = runner.map_chunks(run.chunks(), |c| -> Result<(f64, f64)> {
        let mut rng = RngStream::new(mean_seed, c as u64).generator();
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..run.chunk_range(c) {
            let mut s = 0.0;
            let mut pos = 0usize;
            model.runs(run.n, &mut rng, |v, len| {
                let end = pos + len as usize;
                s += v * (prefix.0[end] - prefix.0[pos]);
                pos = end;
            })?;
            s1 += s;
            s2 += s * s;
        }
        Ok((s1, s2))
    });
    let (mut s1, mut s2) = (0.0, 0.0);
    for p in parts {
        let (a, b) = p?;
        s1 += a;
        s2 += b;
    }
    let m = run.trials as f64;
    let mean = s1 / m;
    let var = ((s2 / m - mean * mean) * m / (m - 1.0)).max(0.0);
    Ok(FunctionalTail { estimates, centering: 0.0, mean_estimate: mean, mean_stderr: sqrt(var / m) })
}

/// A source of i.i.d. regeneration cycles with a known mean length.
pub trait ExcursionSource: Sync {
    fn sample(&self, rng: &mut dyn RngCore) -> ExcursionSample;
    /// Exact `E(τ)`.
    fn mean_length(&self) -> f64;
}

impl ExcursionSource for RenewalLaw {
    fn sample(&self, rng: &mut dyn RngCore) -> ExcursionSample {
        crate::chains::renewal_excursion(self, rng)
    }

    /// `1 + ζ(p)/ζ(p+1)`.
    fn mean_length(&self) -> f64 {
        self.mean_tau_closed()
    }
}

impl ExcursionSource for HarrisParams {
    fn sample(&self, rng: &mut dyn RngCore) -> ExcursionSample {
        crate::chains::harris_excursion(self, rng)
    }

    /// `p/(p − 1)`.
    fn mean_length(&self) -> f64 {
        self.mean_excursion()
    }
}

/// Excursion lengths drawn from an explicit pmf on `{1, …, K}`.
#[derive(Debug, Clone)]
pub struct PmfExcursions {
    pub pmf: Vec<f64>,
    mean: f64,
    sampler: DiscreteSampler,
}

impl PmfExcursions {
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        let mass: f64 = pmf.iter().sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(domain!("pmf sums to {mass}, not 1"));
        }
        let sampler = DiscreteSampler::from_weights(&pmf)?;
        let mean = pmf.iter().enumerate().map(|(i, w)| (i + 1) as f64 * w).sum();
        Ok(Self { pmf, mean, sampler })
    }
}

impl ExcursionSource for PmfExcursions {
    fn sample(&self, rng: &mut dyn RngCore) -> ExcursionSample {
        let len = self.sampler.sample(rng) as u64 + 1;
        ExcursionSample { mark: (len - 1) as f64, length: len }
    }

    fn mean_length(&self) -> f64 {
        self.mean
    }
}

fn excursion_total<S: ExcursionSource + ?Sized>(source: &S, n: u64, rng: &mut dyn RngCore) -> f64 {
    let mut total = 0u64;
    for _ in 0..n {
        total = total.saturating_add(source.sample(rng).length);
    }
    total as f64
}

/// `P(Σ_{i<n} τᵢ ≥ threshold)` for each threshold of a sorted grid.
pub fn excursion_sum_hits<S: ExcursionSource + ?Sized, C: ChunkRunner>(
    source: &S,
    thresholds: &[f64],
    run: TailRun,
    runner: &C,
) -> Result<Vec<TailEstimate>> {
    run.validate()?;
    check_grid(thresholds)?;
    let hits = grid_hits(&run, thresholds, run.seed, runner, |rng| Ok(excursion_total(source, run.n, rng)))?;
    Ok(thresholds
        .iter()
        .zip(hits)
        .map(|(&t, h)| TailEstimate::from_hits(Statistic::ExcursionSum, run.n, t, h, run.trials))
        .collect())
}

/// `P(Σ_{i<n} τᵢ ≥ n E(τ) + x)` for each `x ≥ 0` of a sorted grid, with the
/// closed-form `E(τ)`. The returned estimates carry `x`, not the threshold.
pub fn excursion_sum_tail_grid<S: ExcursionSource + ?Sized, C: ChunkRunner>(
    source: &S,
    x_grid: &[f64],
    run: TailRun,
    runner: &C,
) -> Result<Vec<TailEstimate>> {
    if x_grid.iter().any(|x| !(*x >= 0.0)) {
        return Err(domain!("deviations must be nonnegative"));
    }
    let centre = run.n as f64 * source.mean_length();
    let thresholds: Vec<f64> = x_grid.iter().map(|x| centre + x).collect();
    let mut est = excursion_sum_hits(source, &thresholds, run, runner)?;
    for (e, &x) in est.iter_mut().zip(x_grid) {
        e.x = x;
    }
    Ok(est)
}

pub fn excursion_sum_tail<S: ExcursionSource + ?Sized, C: ChunkRunner>(
    source: &S,
    x: f64,
    run: TailRun,
    runner: &C,
) -> Result<TailEstimate> {
    Ok(excursion_sum_tail_grid(source, &[x], run, runner)?[0])
}

/// Centered excursion sums `Σ_{i<n} τᵢ − n E(τ)`, one per trial.
pub fn excursion_sums<S: ExcursionSource + ?Sized, C: ChunkRunner>(source: &S, run: TailRun, runner: &C) -> Result<Vec<f64>> {
    run.validate()?;
    let centre = run.n as f64 * source.mean_length();
    let parts = runner.map_chunks(run.chunks(), |c| {
        let mut rng = RngStream::new(run.seed, c as u64).generator();
        (0..run.chunk_range(c)).map(|_| excursion_total(source, run.n, &mut rng) - centre).collect::<Vec<f64>>()
    });
    Ok(parts.into_iter().flatten().collect())
}

/// Which variable a [`scaling_fit`] regresses on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingMode {
    /// `log p̂` against `log x` at fixed `n`.
    XExponent,
    /// `log p̂` against `log n` along `x = c·n^α`.
    NExponent,
}

/// Least-squares fit with the points that were left out.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub fit: ScalingFit,
    pub excluded: Vec<usize>,
    pub flags: Vec<String>,
}

/// Minimum hit count for a point to enter a scaling fit.
pub const MIN_FIT_HITS: u64 = 10;

pub fn scaling_fit(estimates: &[TailEstimate], mode: ScalingMode, alpha: Option<f64>) -> Result<ScalingReport> {
    if mode == ScalingMode::NExponent && alpha.is_none() {
        return Err(Error::Usage("the n exponent fit needs alpha".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = Vec::new();
    let mut flags = Vec::new();
    for (i, e) in estimates.iter().enumerate() {
        if e.p_hat == 0.0 {
            excluded.push(i);
            flags.push(format!("point {i} has no hits and was excluded"));
            continue;
        }
        if e.hits < MIN_FIT_HITS {
            excluded.push(i);
            flags.push(format!("point {i} has only {} hits and was excluded", e.hits));
            continue;
        }
        xs.push(match mode {
            ScalingMode::XExponent => ln(e.x),
            ScalingMode::NExponent => ln(e.n as f64),
        });
        ys.push(ln(e.p_hat));
    }
    if xs.len() < 3 {
        return Err(Error::Degenerate(format!(
            "{} usable points after exclusions; at least 3 are needed",
            xs.len()
        )));
    }
    let (fit, _) = stats::ols(&xs, &ys)?;
    Ok(ScalingReport { fit, excluded, flags })
}

/// Smallest `κ` with `κ · shape(n, x) ≥ p̂` at every estimate.
pub fn kappa_fit(estimates: &[TailEstimate], shape: impl Fn(u64, f64) -> f64) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::Usage("kappa fit needs at least one estimate".into()));
    }
    let mut best = 0.0f64;
    for e in estimates {
        let s = shape(e.n, e.x);
        if !(s > 0.0) || !s.is_finite() {
            return Err(domain!("bound shape is {s} at n = {}, x = {}", e.n, e.x));
        }
        best = best.max(e.p_hat / s);
    }
    Ok(best)
}

/// `count` points spaced geometrically on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0) || !(hi >= lo) || count == 0 {
        return Err(domain!("log grid needs 0 < lo <= hi and a positive count"));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (ln(lo), ln(hi));
    Ok((0..count)
        .map(|i| {
            if i == count - 1 {
                hi
            } else {
                libm::exp(a + (b - a) * i as f64 / (count - 1) as f64)
            }
        })
        .collect())
}

pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(hi >= lo) || count == 0 || !lo.is_finite() || !hi.is_finite() {
        return Err(domain!("linear grid needs lo <= hi and a positive count"));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect())
}

/// The default bandwidth `[4n^{1/p}, n/16]`.
pub fn bandwidth(n: u64, p: f64) -> Result<(f64, f64)> {
    if !(p > 1.0) {
        return Err(domain!("bandwidth needs p > 1, got {p}"));
    }
    let lo = 4.0 * powf(n as f64, 1.0 / p);
    let hi = n as f64 / 16.0;
    if !(lo < hi) {
        return Err(domain!("bandwidth [{lo}, {hi}] is empty for n = {n}, p = {p}"));
    }
    Ok((lo, hi))
}

/// `count` log-spaced points in the default bandwidth.
pub fn bandwidth_grid(n: u64, p: f64, count: usize) -> Result<Vec<f64>> {
    let (lo, hi) = bandwidth(n, p)?;
    log_grid(lo, hi, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{HarrisParams, Observable, RenewalLaw};

    fn renewal3() -> (ChainModel, Observable) {
        let law = RenewalLaw::new(3.0, 100_000).unwrap();
        let obs = Observable::renewal_indicator(&law);
        (ChainModel::Renewal(law), obs)
    }

    #[test]
    fn zero_threshold_always_hit_and_impossible_never() {
        let (chain, obs) = renewal3();
        let n = 200;
        let big = 2.0 * obs.sup_norm * n as f64 + 1.0;
        let est = mc_tail(&chain, &obs, &[0.0, big], TailRun::new(n, 500, 1), Statistic::MaxAbsPartialSum, None, &Sequential).unwrap();
        assert_eq!(est[0].p_hat, 1.0);
        assert_eq!(est[1].p_hat, 0.0);
    }

    #[test]
    fn hits_nonincreasing_and_ci_ordered() {
        let (chain, obs) = renewal3();
        let grid = log_grid(2.0, 60.0, 12).unwrap();
        let est = mc_tail(&chain, &obs, &grid, TailRun::new(1000, 3000, 2), Statistic::MaxAbsPartialSum, None, &Sequential).unwrap();
        for w in est.windows(2) {
            assert!(w[1].hits <= w[0].hits);
        }
        for e in &est {
            assert!(0.0 <= e.ci_low && e.ci_low <= e.p_hat && e.p_hat <= e.ci_high && e.ci_high <= 1.0);
        }
    }

    #[test]
    fn run_based_paths_match_step_simulation() {
        // The renewal and Harris fast paths against the generic step path
        // through a custom model, compared on P(|S_n| ≥ x).
        let law = RenewalLaw::new(3.0, 100_000).unwrap();
        let obs = Observable::renewal_indicator(&law);
        let chain = ChainModel::Renewal(law);
        let grid = [1.0, 3.0, 6.0, 10.0];
        let run = TailRun::new(300, 20_000, 5);
        let fast = mc_tail(&chain, &obs, &grid, run, Statistic::MaxAbsPartialSum, None, &Sequential).unwrap();
        let model = PathModel::Steps { chain: &chain, obs: &obs };
        let slow_hits = grid_hits(&run, &grid, 77, &Sequential, |rng| {
            trial_value(&model, run.n, Statistic::MaxAbsPartialSum, None, rng)
        })
        .unwrap();
        for (f, h) in fast.iter().zip(slow_hits) {
            let s = TailEstimate::from_hits(Statistic::MaxAbsPartialSum, run.n, f.x, h, run.trials);
            let tol = 4.0 * (f.half_width() + s.half_width()) / 2.0;
            assert!((f.p_hat - s.p_hat).abs() <= tol, "x={}: {} vs {}", f.x, f.p_hat, s.p_hat);
        }

        let h = HarrisParams::new(2.0, 1.0).unwrap();
        let obs = Observable::harris_power(&h);
        let chain = ChainModel::Harris(h);
        let grid = [2.0, 5.0, 10.0, 20.0];
        let fast = mc_tail(&chain, &obs, &grid, run, Statistic::MaxAbsPartialSum, None, &Sequential).unwrap();
        let model = PathModel::Steps { chain: &chain, obs: &obs };
        let slow_hits = grid_hits(&run, &grid, 78, &Sequential, |rng| {
            trial_value(&model, run.n, Statistic::MaxAbsPartialSum, None, rng)
        })
        .unwrap();
        for (f, h) in fast.iter().zip(slow_hits) {
            let s = TailEstimate::from_hits(Statistic::MaxAbsPartialSum, run.n, f.x, h, run.trials);
            let tol = 4.0 * (f.half_width() + s.half_width()) / 2.0;
            assert!((f.p_hat - s.p_hat).abs() <= tol, "x={}: {} vs {}", f.x, f.p_hat, s.p_hat);
        }
    }

    #[test]
    fn functional_with_unit_weights_is_abs_sum() {
        let (chain, obs) = renewal3();
        let n = 500;
        let grid = [1.0, 4.0, 9.0, 16.0];
        let run = TailRun::new(n, 2000, 9);
        let a = mc_tail(&chain, &obs, &grid, run, Statistic::AbsSum, None, &Sequential).unwrap();
        let f = young_functional_tail(&chain, &vec![1.0; n as usize], &obs, &grid, run, &Sequential).unwrap();
        for (x, y) in a.iter().zip(&f.estimates) {
            assert_eq!((x.hits, x.p_hat), (y.hits, y.p_hat));
        }
        let zero = young_functional_tail(&chain, &vec![0.0; n as usize], &obs, &grid, run, &Sequential).unwrap();
        assert!(zero.estimates.iter().all(|e| e.p_hat == 0.0));
        assert!(f.mean_estimate.abs() < 4.0 * f.mean_stderr);
    }

    #[test]
    fn functional_needs_weights() {
        let (chain, obs) = renewal3();
        let r = mc_tail(&chain, &obs, &[1.0], TailRun::new(10, 100, 1), Statistic::Functional, None, &Sequential);
        assert!(matches!(r, Err(Error::Usage(_))));
        let r = mc_tail(&chain, &obs, &[1.0], TailRun::new(10, 10, 1), Statistic::AbsSum, None, &Sequential);
        assert!(matches!(r, Err(Error::Usage(_))));
    }

    #[test]
    fn estimates_do_not_depend_on_chunking_schedule() {
        struct Reversed;
        impl ChunkRunner for Reversed {
            fn map_chunks<T: Send, F: Fn(usize) -> T + Sync>(&self, count: usize, f: F) -> Vec<T> {
                let mut v: Vec<(usize, T)> = (0..count).rev().map(|c| (c, f(c))).collect();
                v.sort_by_key(|(c, _)| *c);
                v.into_iter().map(|(_, t)| t).collect()
            }
        }
        let (chain, obs) = renewal3();
        let run = TailRun { n: 300, trials: 1000, seed: 4, chunk: 128 };
        let a = mc_tail(&chain, &obs, &[2.0, 5.0], run, Statistic::MaxAbsPartialSum, None, &Sequential).unwrap();
        let b = mc_tail(&chain, &obs, &[2.0, 5.0], run, Statistic::MaxAbsPartialSum, None, &Reversed).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn excursion_tail_centre_is_about_half() {
        let law = RenewalLaw::new(4.0, 100_000).unwrap();
        let e = excursion_sum_tail(&law, 0.0, TailRun::new(2000, 20_000, 3), &Sequential).unwrap();
        // centered sums are right-skewed, so the median sits slightly low
        assert!((e.p_hat - 0.5).abs() < 0.06, "{}", e.p_hat);
    }

    #[test]
    fn oracle_equivalence_small_instance() {
        let law = RenewalLaw::new(3.0, 49).unwrap();
        let src = PmfExcursions::new(law.excursion_length_pmf()).unwrap();
        let n = 6;
        let thresholds: Vec<f64> = (13..=32).map(|t| t as f64).collect();
        let est = excursion_sum_hits(&src, &thresholds, TailRun::new(n, 100_000, 11), &Sequential).unwrap();
        let mut good = 0;
        for e in &est {
            let exact = dp_sum_tail(&src.pmf, n, e.x as u64).unwrap();
            if (e.p_hat - exact).abs() <= 3.0 * e.half_width().max(1e-12) {
                good += 1;
            }
        }
        assert!(good >= 19, "{good}/20");
    }

    #[test]
    fn scaling_fit_exact_power_law() {
        let est: Vec<TailEstimate> = [10.0, 20.0, 40.0, 80.0]
            .iter()
            .map(|&x| {
                let p = 1000.0 / (x * x * x);
                let trials = 1_000_000_000u64;
                let mut e = TailEstimate::from_hits(Statistic::MaxAbsPartialSum, 1000, x, (p * trials as f64) as u64, trials);
                e.p_hat = p;
                e
            })
            .collect();
        let f = scaling_fit(&est, ScalingMode::XExponent, None).unwrap();
        assert!((f.fit.slope + 3.0).abs() < 1e-9);
        assert!(scaling_fit(&est, ScalingMode::NExponent, None).is_err());
        let mut few = est.clone();
        few[0].hits = 0;
        few[0].p_hat = 0.0;
        few[1].hits = 3;
        let r = scaling_fit(&few, ScalingMode::XExponent, None);
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn kappa_fit_is_max_ratio() {
        let mk = |x: f64, p: f64| {
            let mut e = TailEstimate::from_hits(Statistic::MaxAbsPartialSum, 100, x, 1, 10);
            e.p_hat = p;
            e
        };
        let shape = |n: u64, x: f64| n as f64 / (x * x * x);
        let est = vec![mk(2.0, 12.5), mk(4.0, 100.0 / 64.0)];
        assert!((kappa_fit(&est, shape).unwrap() - 1.0).abs() < 1e-15);
        let est2 = vec![mk(2.0, 25.0), mk(4.0, 100.0 / 64.0)];
        assert!((kappa_fit(&est2, shape).unwrap() - 2.0).abs() < 1e-15);
        assert!(kappa_fit(&[], shape).is_err());
    }

    #[test]
    fn grids() {
        let g = bandwidth_grid(10_000, 3.0, 12).unwrap();
        assert_eq!(g.len(), 12);
        assert!((g[0] - 4.0 * 10_000f64.powf(1.0 / 3.0)).abs() < 1e-9);
        assert_eq!(g[11], 625.0);
        assert!(bandwidth(100, 2.0).is_err());
        assert_eq!(linear_grid(1.0, 3.0, 3).unwrap(), vec![1.0, 2.0, 3.0]);
    }
}
