//! The desk-scale experiments behind the verification suites. Each returns
//! raw observations; judging them against targets is left to the caller.

use polymix_core::bounds::{harris_lower_constant, moddev_bound, young_bound, ModDevCase};
use polymix_core::chains::{harris_excursion, ChainModel, HarrisParams, Observable, RenewalLaw};
use polymix_core::mixing::{exact_curve, rate_fit, ExactOptions, MixingCurve, RateFit};
use polymix_core::rng::RngStream;
use polymix_core::tails::block::BlockReport;
use polymix_core::tails::{
    bandwidth_grid, block_check, dp_sum_tail, excursion_sum_hits, excursion_sums, kappa_fit, limit_diagnostic,
    mc_tail, scaling_fit, young_functional_tail, ChunkRunner, LimitKind, PmfExcursions, ScalingMode, ScalingReport,
    Statistic, TailEstimate, TailRun, CHUNK,
};
use polymix_core::{Error, Result};

/// Trial counts and sizes of the experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sizes {
    pub oracle_trials: u64,
    pub lower_trials: u64,
    pub nscale_trials: u64,
    pub domination_trials: u64,
    pub harris_excursions: u64,
    pub harris_tail_trials: u64,
    pub ks_trials: u64,
    pub hill_trials: u64,
    pub variance_trials: u64,
    pub block_paths: u64,
    pub young_trials: u64,
}

impl Default for Sizes {
    fn default() -> Self {
        Self {
            oracle_trials: 100_000,
            lower_trials: 200_000,
            nscale_trials: 200_000,
            domination_trials: 200_000,
            harris_excursions: 1_000_000,
            harris_tail_trials: 20_000,
            ks_trials: 5_000,
            hill_trials: 10_000,
            variance_trials: 10_000,
            block_paths: 1_000,
            young_trials: 200_000,
        }
    }
}

impl Sizes {
    /// Every Monte-Carlo count replaced by `trials`.
    pub fn uniform(trials: u64) -> Self {
        Self {
            oracle_trials: trials,
            lower_trials: trials,
            nscale_trials: trials,
            domination_trials: trials,
            harris_excursions: trials,
            harris_tail_trials: trials,
            ks_trials: trials,
            hill_trials: trials,
            variance_trials: trials,
            block_paths: trials,
            young_trials: trials,
        }
    }
}

/// Oscillation of `π{0} − 1_{n=0}`, its Lipschitz constant for the
/// discrete metric.
const INDICATOR_OSC: f64 = 1.0;

/// Renewal truncation used throughout.
pub const N_TRUNC: usize = 1_000_000;

pub struct Kac {
    pub p: f64,
    pub mean_tau: f64,
    pub pi0: f64,
    pub tail_tol: f64,
}

pub fn kac(p: f64, truncation: usize) -> Result<Kac> {
    let law = RenewalLaw::new(p, truncation)?;
    Ok(Kac { p, mean_tau: law.mean_tau, pi0: law.pi0, tail_tol: law.tail_tol })
}

/// Exact mixing curve of the renewal chain on `n_min..=n_max` and its fit.
pub fn renewal_mixing(p: f64, n_min: u64, n_max: u64) -> Result<(MixingCurve, RateFit)> {
    let law = RenewalLaw::new(p, N_TRUNC)?;
    let obs = Observable::renewal_indicator(&law);
    let ns: Vec<u64> = (n_min..=n_max).collect();
    let curve = exact_curve(&ChainModel::Renewal(law), &obs, &ns, ExactOptions::default())?;
    let fit = rate_fit(&curve, n_min, n_max)?;
    Ok((curve, fit))
}

/// `π(|Kⁿf − πf|)` of the doubling chain with `f(x) = x`.
pub fn doubling_coefficients(ns: &[u64]) -> Result<Vec<f64>> {
    let curve = exact_curve(&ChainModel::Doubling, &Observable::identity(), ns, ExactOptions::default())?;
    Ok(curve.entries.iter().map(|e| e.coeff).collect())
}

pub struct OraclePoint {
    pub threshold: u64,
    pub exact: f64,
    pub estimate: TailEstimate,
}

/// Excursion-length sums of the renewal chain with jumps truncated at `k`,
/// by Monte Carlo and by exact convolution.
pub fn oracle_equivalence<C: ChunkRunner>(
    p: f64,
    k: usize,
    n: u64,
    thresholds: &[u64],
    trials: u64,
    seed: u64,
    runner: &C,
) -> Result<Vec<OraclePoint>> {
    let law = RenewalLaw::new(p, k)?;
    let pmf = law.excursion_length_pmf();
    let mass: f64 = pmf.iter().sum();
    let pmf: Vec<f64> = pmf.iter().map(|w| w / mass).collect();
    let source = PmfExcursions::new(pmf.clone())?;
    let grid: Vec<f64> = thresholds.iter().map(|t| *t as f64).collect();
    let est = excursion_sum_hits(&source, &grid, TailRun::new(n, trials, seed), runner)?;
    thresholds
        .iter()
        .zip(est)
        .map(|(&t, e)| Ok(OraclePoint { threshold: t, exact: dp_sum_tail(&pmf, n, t)?, estimate: e }))
        .collect()
}

pub fn renewal_chain(p: f64) -> Result<(ChainModel, Observable)> {
    let law = RenewalLaw::new(p, N_TRUNC)?;
    let obs = Observable::renewal_indicator(&law);
    Ok((ChainModel::Renewal(law), obs))
}

pub struct XScaling {
    pub estimates: Vec<TailEstimate>,
    pub fit: Result<ScalingReport>,
}

/// `P(max_k |S_k| ≥ x)` on the bandwidth grid and its `x` exponent.
pub fn renewal_x_scaling<C: ChunkRunner>(p: f64, n: u64, count: usize, trials: u64, seed: u64, runner: &C) -> Result<XScaling> {
    let (chain, obs) = renewal_chain(p)?;
    let grid = bandwidth_grid(n, p, count)?;
    let estimates = mc_tail(&chain, &obs, &grid, TailRun::new(n, trials, seed), Statistic::MaxAbsPartialSum, None, runner)?;
    let fit = scaling_fit(&estimates, ScalingMode::XExponent, None);
    Ok(XScaling { estimates, fit })
}

/// `P(max_k |S_k| ≥ c nᵅ)` for each `n`, and the `n` exponent.
#[allow(clippy::too_many_arguments)]
pub fn renewal_n_scaling<C: ChunkRunner>(
    p: f64,
    alpha: f64,
    c: f64,
    ns: &[u64],
    trials: u64,
    seed: u64,
    runner: &C,
) -> Result<XScaling> {
    let (chain, obs) = renewal_chain(p)?;
    let mut estimates = Vec::with_capacity(ns.len());
    for (i, &n) in ns.iter().enumerate() {
        let x = c * (n as f64).powf(alpha);
        let run = TailRun::new(n, trials, polymix_core::rng::derive_seed(seed, i as u64));
        estimates.extend(mc_tail(&chain, &obs, &[x], run, Statistic::MaxAbsPartialSum, None, runner)?);
    }
    let fit = scaling_fit(&estimates, ScalingMode::NExponent, Some(alpha));
    Ok(XScaling { estimates, fit })
}

/// `n x^{−p}`, the polynomial term of the moderate-deviation bound at
/// `κ = 1`. Only this term is linear in `κ`, and the full bound at `κ`
/// dominates `κ n x^{−p}`, so a `κ` fitted against it carries over.
pub fn polynomial_shape(p: f64) -> impl Fn(u64, f64) -> f64 {
    move |n, x| n as f64 * x.powf(-p)
}

pub struct Domination {
    pub kappa: f64,
    pub train: Vec<TailEstimate>,
    /// Test estimates with the bound evaluated at the fitted `κ`.
    pub test: Vec<(TailEstimate, f64)>,
}

/// Interleaves the bandwidth grid of each `n` into a training and a test
/// half, fits `κ` on the first and evaluates the bound on the second with
/// an independent seed.
pub fn renewal_domination<C: ChunkRunner>(p: f64, ns: &[u64], count: usize, trials: u64, seed: u64, runner: &C) -> Result<Domination> {
    let (chain, obs) = renewal_chain(p)?;
    let mut train = Vec::new();
    let mut test_est = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let grid = bandwidth_grid(n, p, 2 * count)?;
        let a: Vec<f64> = grid.iter().step_by(2).copied().collect();
        let b: Vec<f64> = grid.iter().skip(1).step_by(2).copied().collect();
        let s = polymix_core::rng::derive_seed(seed, 2 * i as u64);
        let t = polymix_core::rng::derive_seed(seed, 2 * i as u64 + 1);
        train.extend(mc_tail(&chain, &obs, &a, TailRun::new(n, trials, s), Statistic::MaxAbsPartialSum, None, runner)?);
        test_est.extend(mc_tail(&chain, &obs, &b, TailRun::new(n, trials, t), Statistic::MaxAbsPartialSum, None, runner)?);
    }
    let kappa = kappa_fit(&train, polynomial_shape(p))?;
    let test = test_est
        .into_iter()
        .map(|e| Ok((e, moddev_bound(ModDevCase::for_p(p), e.n as f64, e.x, p, None, kappa)?.total)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Domination { kappa, train, test })
}

/// Sample mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moment {
    pub mean: f64,
    pub stderr: f64,
}

impl Moment {
    fn from_sums(s1: f64, s2: f64, m: f64) -> Self {
        let mean = s1 / m;
        let var = ((s2 / m - mean * mean) * m / (m - 1.0)).max(0.0);
        Self { mean, stderr: (var / m).sqrt() }
    }
}

pub struct HarrisIdentities {
    pub params: HarrisParams,
    pub mean_tau: Moment,
    pub mean_power: Moment,
    /// `(ℓ, P̂(τ ≥ ℓ) with its standard error)`.
    pub tails: Vec<(u64, Moment)>,
}

/// Excursion moments of the Harris chain and the stationary mean of `Y^γ`.
pub fn harris_identities<C: ChunkRunner>(
    p: f64,
    gamma: f64,
    draws: u64,
    ells: &[u64],
    seed: u64,
    runner: &C,
) -> Result<HarrisIdentities> {
    if draws < 2 {
        return Err(Error::Usage("at least 2 draws are needed".into()));
    }
    let h = HarrisParams::new(p, gamma)?;
    let chunks = draws.div_ceil(CHUNK) as usize;
    let parts = runner.map_chunks(chunks, |c| {
        let mut rng = RngStream::new(seed, c as u64).generator();
        let count = (c as u64 * CHUNK + CHUNK).min(draws) - c as u64 * CHUNK;
        let mut tau = (0.0, 0.0);
        let mut pow = (0.0, 0.0);
        let mut over = vec![0u64; ells.len()];
        for _ in 0..count {
            let e = harris_excursion(&h, &mut rng);
            let l = e.length as f64;
            tau.0 += l;
            tau.1 += l * l;
            for (o, &ell) in over.iter_mut().zip(ells) {
                if e.length >= ell {
                    *o += 1;
                }
            }
            let y = h.sample_pi(&mut rng).powf(gamma);
            pow.0 += y;
            pow.1 += y * y;
        }
        (tau, pow, over)
    });
    let mut tau = (0.0, 0.0);
    let mut pow = (0.0, 0.0);
    let mut over = vec![0u64; ells.len()];
    for (t, q, o) in parts {
        tau.0 += t.0;
        tau.1 += t.1;
        pow.0 += q.0;
        pow.1 += q.1;
        over.iter_mut().zip(o).for_each(|(a, b)| *a += b);
    }
    let m = draws as f64;
    let tails = ells
        .iter()
        .zip(over)
        .map(|(&ell, k)| {
            let ph = k as f64 / m;
            (ell, Moment { mean: ph, stderr: (ph * (1.0 - ph) / m).sqrt() })
        })
        .collect();
    Ok(HarrisIdentities {
        params: h,
        mean_tau: Moment::from_sums(tau.0, tau.1, m),
        mean_power: Moment::from_sums(pow.0, pow.1, m),
        tails,
    })
}

pub struct HarrisLower {
    pub constant: f64,
    /// Estimates with the floor `C_{p,γ} n/xᵖ`.
    pub points: Vec<(TailEstimate, f64)>,
}

pub fn harris_lower<C: ChunkRunner>(p: f64, gamma: f64, n: u64, count: usize, trials: u64, seed: u64, runner: &C) -> Result<HarrisLower> {
    let h = HarrisParams::new(p, gamma)?;
    let obs = Observable::harris_power(&h);
    let grid = bandwidth_grid(n, p, count)?;
    let est = mc_tail(&ChainModel::Harris(h), &obs, &grid, TailRun::new(n, trials, seed), Statistic::MaxAbsPartialSum, None, runner)?;
    let constant = harris_lower_constant(p, gamma)?;
    let points = est.into_iter().map(|e| (e, constant * n as f64 / e.x.powf(p))).collect();
    Ok(HarrisLower { constant, points })
}

/// Centered excursion sums of the renewal chain divided by `scale(n)`.
pub fn scaled_excursion_sums<C: ChunkRunner>(
    p: f64,
    n: u64,
    trials: u64,
    seed: u64,
    scale: f64,
    runner: &C,
) -> Result<Vec<f64>> {
    let law = RenewalLaw::new(p, N_TRUNC)?;
    Ok(excursion_sums(&law, TailRun::new(n, trials, seed), runner)?.into_iter().map(|v| v / scale).collect())
}

pub struct Limits {
    pub ks_p3: f64,
    pub hill_p15: f64,
    /// `(n, sample variance of the sum over √(n log n))` at `p = 2`.
    pub variances_p2: Vec<(u64, f64)>,
}

pub fn limits<C: ChunkRunner>(sizes: &Sizes, seed: u64, runner: &C) -> Result<Limits> {
    let n3 = 10_000u64;
    let s3 = scaled_excursion_sums(3.0, n3, sizes.ks_trials, seed, (n3 as f64).sqrt(), runner)?;
    let ks_p3 = limit_diagnostic(&s3, LimitKind::KsNormal)?;
    let n15 = 1_000u64;
    let s15 = scaled_excursion_sums(1.5, n15, sizes.hill_trials, seed ^ 1, (n15 as f64).powf(1.0 / 1.5), runner)?;
    let hill_p15 = limit_diagnostic(&s15, LimitKind::HillIndex)?;
    let mut variances_p2 = Vec::new();
    for (i, n) in [1_000u64, 10_000, 100_000].into_iter().enumerate() {
        let nf = n as f64;
        let s = scaled_excursion_sums(2.0, n, sizes.variance_trials, seed ^ (2 + i as u64), (nf * nf.ln()).sqrt(), runner)?;
        variances_p2.push((n, sample_variance(&s)));
    }
    Ok(Limits { ks_p3, hill_p15, variances_p2 })
}

pub fn sample_variance(v: &[f64]) -> f64 {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0)
}

pub fn blocks<C: ChunkRunner>(p: f64, n: u64, x: f64, paths: u64, seed: u64, runner: &C) -> Result<BlockReport> {
    let law = RenewalLaw::new(p, N_TRUNC)?;
    block_check(&law, x, TailRun::new(n, paths, seed), runner)
}

pub struct YoungDomination {
    pub kappa: f64,
    pub train: Vec<TailEstimate>,
    pub test: Vec<(TailEstimate, f64)>,
    pub mean_estimate: f64,
    pub mean_stderr: f64,
}

/// The `w ≡ 1` functional `|Σ f(Yᵢ)|` on the renewal chain: `κ` fitted on
/// one half of the bandwidth grid, the concentration bound evaluated on the
/// other.
pub fn young_domination<C: ChunkRunner>(p: f64, n: u64, count: usize, trials: u64, seed: u64, runner: &C) -> Result<YoungDomination> {
    let (chain, obs) = renewal_chain(p)?;
    let weights = vec![1.0; n as usize];
    let lip: Vec<f64> = weights.iter().map(|w| w * INDICATOR_OSC).collect();
    let grid = bandwidth_grid(n, p, 2 * count)?;
    let a: Vec<f64> = grid.iter().step_by(2).copied().collect();
    let b: Vec<f64> = grid.iter().skip(1).step_by(2).copied().collect();
    let seed_a = polymix_core::rng::derive_seed(seed, 0);
    let seed_b = polymix_core::rng::derive_seed(seed, 1);
    let train = young_functional_tail(&chain, &weights, &obs, &a, TailRun::new(n, trials, seed_a), runner)?;
    let test = young_functional_tail(&chain, &weights, &obs, &b, TailRun::new(n, trials, seed_b), runner)?;
    // the polynomial term ΣLᵢᵖ/xᵖ, for the same reason as in polynomial_shape
    let sum_lp: f64 = lip.iter().map(|l| l.powf(p)).sum();
    let shape = |_: u64, x: f64| sum_lp * x.powf(-p);
    let kappa = kappa_fit(&train.estimates, shape)?;
    let points = test
        .estimates
        .iter()
        .map(|e| Ok((*e, young_bound(p, &lip, e.x, kappa)?.total)))
        .collect::<Result<Vec<_>>>()?;
    Ok(YoungDomination {
        kappa,
        train: train.estimates,
        test: points,
        mean_estimate: test.mean_estimate,
        mean_stderr: test.mean_stderr,
    })
}
