//! Mixing coefficients `π(|Kⁿf − πf|)`: exact iteration on finite or
//! discretized kernels, a closed form for the doubling chain, a nested
//! Monte-Carlo estimator, and log–log rate fits.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand_core::RngCore;

use crate::chains::{
    observable_value, ChainModel, DiscreteSampler, HarrisParams, Observable, ObservableKind,
    RenewalLaw, State,
};
use crate::error::domain;
use crate::rng::{open01, RngStream};
use crate::special::{beta_int, powf};
use crate::tails::stats::{ols, ScalingFit};
use crate::tails::ChunkRunner;
use crate::{Error, Result};

/// Default number of midpoint bins for the Harris chain.
pub const HARRIS_BINS: usize = 4096;

/// Row structure of a [`FiniteKernel`].
#[derive(Debug, Clone)]
pub enum Transition {
    /// Row-major `len × len` matrix.
    Dense(Vec<f64>),
    /// Truncated renewal kernel: `0 → j` with `jump[j − 1]`, `j → j − 1`.
    Renewal { jump: Vec<f64> },
    /// `s → s` with `hold[s]`, otherwise a fresh draw from `refresh`.
    HoldOrRefresh { hold: Vec<f64>, refresh: Vec<f64> },
}

/// A transition kernel on a finite ordered state set.
#[derive(Debug, Clone)]
pub struct FiniteKernel {
    /// State labels (integers for discrete chains, bin midpoints for
    /// discretized continuous ones).
    pub states: Vec<f64>,
    pub transition: Transition,
    pub pi: Option<Vec<f64>>,
    /// Zero for genuinely finite chains.
    pub discretization_error: f64,
    row_samplers: Vec<DiscreteSampler>,
    pi_sampler: Option<DiscreteSampler>,
}

impl FiniteKernel {
    /// Dense kernel from a row-major matrix. Rows must sum to 1 within
    /// `1e-12`; a supplied `pi` must be invariant within `1e-10`.
    pub fn dense(states: Vec<f64>, matrix: Vec<f64>, pi: Option<Vec<f64>>) -> Result<Self> {
        let n = states.len();
        if n == 0 || matrix.len() != n * n {
            return Err(domain!("matrix must be {n}×{n}"));
        }
        let mut row_samplers = Vec::with_capacity(n);
        for (i, row) in matrix.chunks(n).enumerate() {
            let s: f64 = row.iter().sum();
            if row.iter().any(|v| !(*v >= 0.0)) || (s - 1.0).abs() > 1e-12 {
                return Err(domain!("row {i} is not a probability vector (sum {s})"));
            }
            row_samplers.push(DiscreteSampler::from_weights(row)?);
        }
        let pi_sampler = match &pi {
            Some(w) => {
                if w.len() != n {
                    return Err(domain!("stationary weights have length {} for {n} states", w.len()));
                }
                for j in 0..n {
                    let image: f64 = (0..n).map(|i| w[i] * matrix[i * n + j]).sum();
                    if (image - w[j]).abs() > 1e-10 {
                        return Err(domain!("supplied weights are not invariant at state {j}"));
                    }
                }
                Some(DiscreteSampler::from_weights(w)?)
            }
            None => None,
        };
        Ok(Self {
            states,
            transition: Transition::Dense(matrix),
            pi,
            discretization_error: 0.0,
            row_samplers,
            pi_sampler,
        })
    }

    /// The renewal chain with jumps truncated at `law.truncation_n` and
    /// renormalized. Its stationary law is computed exactly for the
    /// truncated kernel: `π_K(j) ∝ Q(J ≥ j)`, `π_K(0) = π_K(1)`.
    pub fn renewal(law: &RenewalLaw) -> Result<Self> {
        // weights decrease in the state, so summing from the far end keeps
        // the rounding of a 10⁶-term sum near one ulp
        let mass: f64 = law.jump_pmf.iter().rev().sum();
        let jump: Vec<f64> = law.jump_pmf.iter().map(|w| w / mass).collect();
        let big_n = jump.len();
        let mut pi = alloc::vec![0.0; big_n + 1];
        let mut acc = 0.0;
        for j in (1..=big_n).rev() {
            acc += jump[j - 1];
            pi[j] = acc;
        }
        pi[0] = pi[1];
        let total: f64 = pi.iter().rev().sum();
        pi.iter_mut().for_each(|w| *w /= total);
        let pi_sampler = Some(DiscreteSampler::from_weights(&pi)?);
        let row_samplers = alloc::vec![DiscreteSampler::from_weights(&jump)?];
        Ok(Self {
            states: (0..=big_n).map(|s| s as f64).collect(),
            transition: Transition::Renewal { jump },
            pi: Some(pi),
            discretization_error: law.tail_tol,
            row_samplers,
            pi_sampler,
        })
    }

    /// Midpoint discretization of the Harris kernel on `bins` cells. The
    /// holding atom is kept exactly per cell, ν is binned with its exact
    /// cell masses, and `π_j ∝ ν_j / x_j` is the exact invariant law of the
    /// discretized kernel.
    pub fn harris(params: &HarrisParams, bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(domain!("Harris discretization needs at least 2 bins"));
        }
        let m = bins as f64;
        let e = params.a + 1.0;
        let states: Vec<f64> = (0..bins).map(|j| (j as f64 + 0.5) / m).collect();
        let refresh: Vec<f64> = (0..bins)
            .map(|j| powf((j + 1) as f64 / m, e) - powf(j as f64 / m, e))
            .collect();
        let hold: Vec<f64> = states.iter().map(|x| 1.0 - x).collect();
        let mut pi: Vec<f64> = refresh.iter().zip(&states).map(|(v, x)| v / x).collect();
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|w| *w /= total);
        let pi_sampler = Some(DiscreteSampler::from_weights(&pi)?);
        let row_samplers = alloc::vec![DiscreteSampler::from_weights(&refresh)?];
        Ok(Self {
            states,
            transition: Transition::HoldOrRefresh { hold, refresh },
            pi: Some(pi),
            discretization_error: 0.0,
            row_samplers,
            pi_sampler,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn stationary_sampler(&self) -> Option<&DiscreteSampler> {
        self.pi_sampler.as_ref()
    }

    /// One transition from state index `s`.
    pub fn sample_row<R: RngCore + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        match &self.transition {
            Transition::Dense(_) => self.row_samplers[s].sample(rng),
            Transition::Renewal { .. } => {
                if s > 0 {
                    s - 1
                } else {
                    self.row_samplers[0].sample(rng) + 1
                }
            }
            Transition::HoldOrRefresh { hold, .. } => {
                if open01(rng) < hold[s] {
                    s
                } else {
                    self.row_samplers[0].sample(rng)
                }
            }
        }
    }

    /// `out = K g`.
    pub fn apply(&self, g: &[f64], out: &mut [f64]) {
        let n = self.len();
        debug_assert!(g.len() == n && out.len() == n);
        match &self.transition {
            Transition::Dense(m) => {
                for (o, row) in out.iter_mut().zip(m.chunks(n)) {
                    *o = row.iter().zip(g).map(|(a, b)| a * b).sum();
                }
            }
            Transition::Renewal { jump } => {
                let from_zero: f64 = jump.iter().zip(&g[1..]).rev().map(|(a, b)| a * b).sum();
                out[1..].copy_from_slice(&g[..n - 1]);
                out[0] = from_zero;
            }
            Transition::HoldOrRefresh { hold, refresh } => {
                let fresh: f64 = refresh.iter().zip(g).map(|(a, b)| a * b).sum();
                for ((o, h), v) in out.iter_mut().zip(hold).zip(g) {
                    *o = h * v + (1.0 - h) * fresh;
                }
            }
        }
    }

    /// `π(g)`, or an error when the kernel carries no stationary law.
    pub fn pi_mean(&self, g: &[f64]) -> Result<f64> {
        let pi = self.pi_or_err()?;
        Ok(pi.iter().zip(g).map(|(a, b)| a * b).sum())
    }

    fn pi_or_err(&self) -> Result<&[f64]> {
        self.pi
            .as_deref()
            .ok_or_else(|| Error::Unsupported("kernel has no stationary law".into()))
    }
}

/// `Kⁿ f` by repeated application.
pub fn exact_iterate(kernel: &FiniteKernel, f: &[f64], n: i64) -> Result<Vec<f64>> {
    if n < 0 {
        return Err(domain!("iteration count must be nonnegative, got {n}"));
    }
    if f.len() != kernel.len() || f.iter().any(|v| !v.is_finite()) {
        return Err(domain!("f must be finite on all {} states", kernel.len()));
    }
    let mut cur = f.to_vec();
    let mut next = alloc::vec![0.0; f.len()];
    for _ in 0..n {
        kernel.apply(&cur, &mut next);
        core::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// `Kⁿ f(x) = 2^{−n} Σ_{j<2ⁿ} f((x + j)/2ⁿ)` for the doubling chain.
pub fn doubling_iterate(f: impl Fn(f64) -> f64, x: f64, n: u32) -> Result<f64> {
    if n > 30 {
        return Err(Error::Size(format!("2^{n} terms is beyond desk scale")));
    }
    let m = (1u64 << n) as f64;
    let mut acc = 0.0;
    for j in 0..(1u64 << n) {
        acc += f((x + j as f64) / m);
    }
    Ok(acc / m)
}

/// `Kⁿ` applied to the affine map `αx + β` on the doubling chain, which
/// stays affine: `K(αx + β) = (α/2)x + α/4 + β`.
pub fn doubling_affine_iterate(alpha: f64, beta: f64, n: u64) -> (f64, f64) {
    let (mut a, mut b) = (alpha, beta);
    for _ in 0..n {
        b += a / 4.0;
        a /= 2.0;
    }
    (a, b)
}

/// `∫₀¹ |αx + β| dx`.
pub fn affine_abs_integral(alpha: f64, beta: f64) -> f64 {
    if alpha == 0.0 {
        return beta.abs();
    }
    let root = -beta / alpha;
    if root <= 0.0 || root >= 1.0 {
        return (alpha / 2.0 + beta).abs();
    }
    (beta.abs() * root + (alpha + beta).abs() * (1.0 - root)) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Mc,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Mc => "mc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingPoint {
    pub n: u64,
    pub coeff: f64,
    pub stderr: f64,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MixingCurve {
    pub entries: Vec<MixingPoint>,
    /// Bound on the error of exact entries coming from truncation or
    /// discretization.
    pub discretization_error: f64,
}

/// Controls for the exact path.
#[derive(Debug, Clone, Copy)]
pub struct ExactOptions {
    pub harris_bins: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self { harris_bins: HARRIS_BINS }
    }
}

/// Observable values on the kernel's states, centered by the kernel's own
/// stationary mean.
pub fn centered_on_kernel(kernel: &FiniteKernel, obs: &Observable) -> Result<Vec<f64>> {
    let raw: Vec<f64> = match &obs.kind {
        ObservableKind::RenewalIndicator => {
            (0..kernel.len()).map(|s| if s == 0 { 1.0 } else { 0.0 }).collect()
        }
        ObservableKind::CustomTable { values } => {
            if values.len() != kernel.len() {
                return Err(Error::Lookup(format!(
                    "observable table has {} entries for {} states",
                    values.len(),
                    kernel.len()
                )));
            }
            values.clone()
        }
        ObservableKind::HarrisPower { gamma } => kernel.states.iter().map(|x| powf(*x, *gamma)).collect(),
        ObservableKind::Identity => kernel.states.clone(),
    };
    let m = kernel.pi_mean(&raw)?;
    Ok(raw.into_iter().map(|v| v - m).collect())
}

/// `π(|Kⁿf − πf|)` on a finite kernel, for each `n` in `ns` (any order).
pub fn kernel_coefficients(kernel: &FiniteKernel, f_centered: &[f64], ns: &[u64]) -> Result<Vec<f64>> {
    let pi = kernel.pi_or_err()?;
    if f_centered.len() != kernel.len() {
        return Err(domain!("f must have one value per state"));
    }
    let mut order: Vec<usize> = (0..ns.len()).collect();
    order.sort_by_key(|&i| ns[i]);
    let mut out = alloc::vec![0.0; ns.len()];
    let mut cur = f_centered.to_vec();
    let mut next = alloc::vec![0.0; cur.len()];
    let mut at = 0u64;
    for i in order {
        while at < ns[i] {
            kernel.apply(&cur, &mut next);
            core::mem::swap(&mut cur, &mut next);
            at += 1;
        }
        out[i] = pi.iter().zip(&cur).map(|(w, v)| w * v.abs()).sum();
    }
    Ok(out)
}

/// Exact mixing curve for a built-in chain.
///
/// Renewal uses the truncated kernel, Harris a midpoint discretization
/// (error from a Richardson comparison with half as many bins), doubling
/// the affine closed form, which requires the identity observable.
pub fn exact_curve(chain: &ChainModel, obs: &Observable, ns: &[u64], opts: ExactOptions) -> Result<MixingCurve> {
    let pack = |coeffs: Vec<f64>, err: f64| MixingCurve {
        entries: ns
            .iter()
            .zip(coeffs)
            .map(|(&n, coeff)| MixingPoint { n, coeff, stderr: 0.0, method: Method::Exact })
            .collect(),
        discretization_error: err,
    };
    match chain {
        ChainModel::Renewal(law) | ChainModel::Tower(law) => {
            let k = FiniteKernel::renewal(law)?;
            let f = centered_on_kernel(&k, obs)?;
            Ok(pack(kernel_coefficients(&k, &f, ns)?, k.discretization_error))
        }
        ChainModel::Harris(h) => {
            let fine = FiniteKernel::harris(h, opts.harris_bins)?;
            let coarse = FiniteKernel::harris(h, (opts.harris_bins / 2).max(2))?;
            let c_fine = kernel_coefficients(&fine, &centered_on_kernel(&fine, obs)?, ns)?;
            let c_coarse = kernel_coefficients(&coarse, &centered_on_kernel(&coarse, obs)?, ns)?;
            let err = c_fine.iter().zip(&c_coarse).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Ok(pack(c_fine, err))
        }
        ChainModel::Doubling => {
            let (alpha, beta) = match obs.kind {
                ObservableKind::Identity => (1.0, -obs.centering),
                _ => {
                    return Err(Error::Unsupported(
                        "exact doubling coefficients need the identity observable".into(),
                    ))
                }
            };
            let coeffs = ns
                .iter()
                .map(|&n| {
                    let (a, b) = doubling_affine_iterate(alpha, beta, n);
                    affine_abs_integral(a, b)
                })
                .collect();
            Ok(pack(coeffs, 0.0))
        }
        ChainModel::Table(k) => {
            let f = centered_on_kernel(k, obs)?;
            Ok(pack(kernel_coefficients(k, &f, ns)?, 0.0))
        }
    }
}

/// Single exact coefficient.
pub fn h1_coefficient(chain: &ChainModel, obs: &Observable, n: u64) -> Result<(f64, f64)> {
    if n < 1 {
        return Err(domain!("mixing coefficient needs n >= 1"));
    }
    let c = exact_curve(chain, obs, &[n], ExactOptions::default())?;
    Ok((c.entries[0].coeff, 0.0))
}

/// Nested Monte-Carlo estimate of `π(|Kⁿf − πf|)`: `starts` stationary
/// starting points, each with `inner` independent continuations of length
/// `n`. Starting points are split into chunks of `chunk` with one stream
/// per chunk.
#[derive(Debug, Clone, Copy)]
pub struct McOptions {
    pub starts: u64,
    pub inner: u64,
    pub seed: u64,
    pub chunk: u64,
}

pub fn h1_coefficient_mc<C: ChunkRunner>(
    chain: &ChainModel,
    obs: &Observable,
    n: u64,
    opts: McOptions,
    runner: &C,
) -> Result<MixingPoint> {
    if opts.starts < 100 {
        return Err(Error::Usage(format!(
            "Monte-Carlo mixing needs at least 100 starts, got {}",
            opts.starts
        )));
    }
    if opts.inner == 0 || opts.chunk == 0 {
        return Err(domain!("inner sample size and chunk size must be positive"));
    }
    // centering by the chain's own mean, so a constant shift of f cancels
    let chunks = opts.starts.div_ceil(opts.chunk) as usize;
    let partial = runner.map_chunks(chunks, |c| -> Result<(f64, f64)> {
        let mut rng = RngStream::new(opts.seed, c as u64).generator();
        let lo = c as u64 * opts.chunk;
        let hi = (lo + opts.chunk).min(opts.starts);
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in lo..hi {
            let start = chain.stationary_sample(&mut rng)?;
            let mut acc = 0.0;
            for _ in 0..opts.inner {
                let mut s: State = start;
                for _ in 0..n {
                    s = chain.step(s, &mut rng)?;
                }
                acc += observable_value(obs, s)?;
            }
            let v = (acc / opts.inner as f64).abs();
            s1 += v;
            s2 += v * v;
        }
        Ok((s1, s2))
    });
    let (mut s1, mut s2) = (0.0, 0.0);
    for p in partial {
        let (a, b) = p?;
        s1 += a;
        s2 += b;
    }
    let m = opts.starts as f64;
    let mean = s1 / m;
    let var = ((s2 / m - mean * mean) * m / (m - 1.0)).max(0.0);
    Ok(MixingPoint { n, coeff: mean, stderr: libm::sqrt(var / m), method: Method::Mc })
}

/// `E_π(T^k) = a ∫₀¹ (1 − x)^k x^{a−1} dx` for the Harris chain, with
/// `T(x) = 1 − x`.
pub fn harris_pi_t_moment(params: &HarrisParams, k: u32) -> f64 {
    params.a * beta_int(params.a - 1.0, k)
}

/// Outcome of [`rate_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub fit: ScalingFit,
    /// `n` values in range whose coefficient was zero.
    pub excluded: Vec<u64>,
    /// Set when `log coeff` is better explained linearly in `n` than in
    /// `log n`, i.e. the decay is faster than any power.
    pub faster_than_polynomial: bool,
    pub flags: Vec<String>,
}

/// Least-squares slope of `log coeff` against `log n` over `[n_min, n_max]`.
pub fn rate_fit(curve: &MixingCurve, n_min: u64, n_max: u64) -> Result<RateFit> {
    let mut excluded = Vec::new();
    let mut xs = Vec::new();
    let mut ns = Vec::new();
    let mut ys = Vec::new();
    for e in curve.entries.iter().filter(|e| e.n >= n_min && e.n <= n_max) {
        if e.coeff > 0.0 && e.n > 0 {
            xs.push(libm::log(e.n as f64));
            ns.push(e.n as f64);
            ys.push(libm::log(e.coeff));
        } else {
            excluded.push(e.n);
        }
    }
    if xs.len() < 5 {
        return Err(Error::Degenerate(format!(
            "rate fit needs at least 5 positive coefficients in [{n_min}, {n_max}], found {}",
            xs.len()
        )));
    }
    let (fit, rss_log) = ols(&xs, &ys)?;
    let (_, rss_lin) = ols(&ns, &ys)?;
    let faster_than_polynomial = rss_lin < rss_log;
    let mut flags = Vec::new();
    if !excluded.is_empty() {
        flags.push(format!("excluded {} zero coefficients", excluded.len()));
    }
    if faster_than_polynomial {
        flags.push("faster than polynomial".into());
    }
    Ok(RateFit { fit, excluded, faster_than_polynomial, flags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::RenewalLaw;
    use crate::tails::Sequential;

    fn two_state() -> FiniteKernel {
        // P = [[0.9, 0.1], [0.3, 0.7]], π = (0.75, 0.25)
        FiniteKernel::dense(
            alloc::vec![0.0, 1.0],
            alloc::vec![0.9, 0.1, 0.3, 0.7],
            Some(alloc::vec![0.75, 0.25]),
        )
        .unwrap()
    }

    #[test]
    fn dense_validation() {
        assert!(FiniteKernel::dense(alloc::vec![0.0, 1.0], alloc::vec![0.9, 0.2, 0.3, 0.7], None).is_err());
        assert!(FiniteKernel::dense(
            alloc::vec![0.0, 1.0],
            alloc::vec![0.9, 0.1, 0.3, 0.7],
            Some(alloc::vec![0.5, 0.5])
        )
        .is_err());
    }

    #[test]
    fn iterate_zero_is_identity_and_negative_is_error() {
        let k = two_state();
        let f = [1.0, -3.0];
        assert_eq!(exact_iterate(&k, &f, 0).unwrap(), f.to_vec());
        assert!(exact_iterate(&k, &f, -1).is_err());
    }

    #[test]
    fn two_state_closed_form() {
        // second eigenvalue 0.6; centered f decays as 0.6ⁿ
        let k = two_state();
        let f = centered_on_kernel(&k, &Observable::custom_table(alloc::vec![1.0, 0.0], &[0.75, 0.25]).unwrap()).unwrap();
        for n in 0..20u64 {
            let g = exact_iterate(&k, &f, n as i64).unwrap();
            assert!((g[0] - 0.25 * 0.6f64.powi(n as i32)).abs() < 1e-14);
            assert!((g[1] + 0.75 * 0.6f64.powi(n as i32)).abs() < 1e-14);
        }
    }

    #[test]
    fn semigroup_property() {
        let law = RenewalLaw::new(2.5, 200).unwrap();
        let k = FiniteKernel::renewal(&law).unwrap();
        let f: Vec<f64> = (0..k.len()).map(|s| ((s * 7919) % 13) as f64 / 13.0).collect();
        for (m, n) in [(3i64, 5i64), (10, 17), (0, 9)] {
            let direct = exact_iterate(&k, &f, m + n).unwrap();
            let nested = exact_iterate(&k, &exact_iterate(&k, &f, n).unwrap(), m).unwrap();
            for (a, b) in direct.iter().zip(&nested) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn renewal_one_step_from_zero() {
        let law = RenewalLaw::new(3.0, 1000).unwrap();
        let k = FiniteKernel::renewal(&law).unwrap();
        let f: Vec<f64> = (0..k.len()).map(|s| (s as f64).sqrt()).collect();
        let g = exact_iterate(&k, &f, 1).unwrap();
        let mass: f64 = law.jump_pmf.iter().sum();
        let direct: f64 = law.jump_pmf.iter().enumerate().map(|(i, w)| w / mass * f[i + 1]).sum();
        assert!((g[0] - direct).abs() < 1e-14);
        assert_eq!(g[5], f[4]);
    }

    #[test]
    fn truncated_renewal_pi_is_invariant() {
        let law = RenewalLaw::new(2.0, 500).unwrap();
        let k = FiniteKernel::renewal(&law).unwrap();
        let pi = k.pi.clone().unwrap();
        // π K = π: check ⟨π, K e_j⟩ through apply on indicator vectors
        for j in [0usize, 1, 2, 17, 499, 500] {
            let mut e = alloc::vec![0.0; k.len()];
            e[j] = 1.0;
            let mut out = alloc::vec![0.0; k.len()];
            k.apply(&e, &mut out);
            let image: f64 = pi.iter().zip(&out).map(|(a, b)| a * b).sum();
            assert!((image - pi[j]).abs() < 1e-14, "j={j}");
        }
    }

    #[test]
    fn doubling_closed_form_matches_dyadic_sum() {
        for n in 0..12u32 {
            for &x in &[0.0, 0.3, 0.77] {
                let brute = doubling_iterate(|y| y, x, n).unwrap();
                let (a, b) = doubling_affine_iterate(1.0, 0.0, n as u64);
                assert!((brute - (a * x + b)).abs() < 1e-13);
            }
        }
        let (a, b) = doubling_affine_iterate(1.0, 0.0, 1);
        assert_eq!((a, b), (0.5, 0.25));
    }

    #[test]
    fn doubling_coefficients() {
        let obs = Observable::identity();
        let ns: Vec<u64> = (1..=20).collect();
        let c = exact_curve(&ChainModel::Doubling, &obs, &ns, ExactOptions::default()).unwrap();
        for e in &c.entries {
            assert!((e.coeff - powf(2.0, -(e.n as f64 + 2.0))).abs() < 1e-15);
        }
        assert_eq!(c.entries[0].coeff, 0.125);
        let fit = rate_fit(&c, 1, 20).unwrap();
        assert!(fit.faster_than_polynomial);
    }

    #[test]
    fn affine_integral_cases() {
        assert_eq!(affine_abs_integral(0.0, -2.0), 2.0);
        assert!((affine_abs_integral(1.0, -0.5) - 0.25).abs() < 1e-15);
        assert!((affine_abs_integral(1.0, 1.0) - 1.5).abs() < 1e-15);
        // Simpson cross-check with a kink at 0.3
        let (a, b) = (2.0, -0.6);
        let steps = 100_000;
        let h = 1.0 / steps as f64;
        let quad: f64 = (0..steps).map(|i| (a * ((i as f64 + 0.5) * h) + b).abs() * h).sum();
        assert!((quad - affine_abs_integral(a, b)).abs() < 1e-8);
    }

    #[test]
    fn constant_observable_has_zero_coefficient() {
        let k = two_state();
        let f = centered_on_kernel(&k, &Observable::custom_table(alloc::vec![2.0, 2.0], &[0.75, 0.25]).unwrap()).unwrap();
        for c in kernel_coefficients(&k, &f, &[1, 5, 9]).unwrap() {
            assert!(c.abs() < 1e-15);
        }
    }

    #[test]
    fn shift_invariance() {
        let law = RenewalLaw::new(3.0, 300).unwrap();
        let k = FiniteKernel::renewal(&law).unwrap();
        let pi = k.pi.clone().unwrap();
        let vals: Vec<f64> = (0..k.len()).map(|s| (s % 5) as f64).collect();
        let shifted: Vec<f64> = vals.iter().map(|v| v + 11.0).collect();
        let a = centered_on_kernel(&k, &Observable::custom_table(vals, &pi).unwrap()).unwrap();
        let b = centered_on_kernel(&k, &Observable::custom_table(shifted, &pi).unwrap()).unwrap();
        let ca = kernel_coefficients(&k, &a, &[1, 10, 40]).unwrap();
        let cb = kernel_coefficients(&k, &b, &[1, 10, 40]).unwrap();
        for (x, y) in ca.iter().zip(&cb) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    /// Independent route: `g_m = Kᵐf(0) = π_K{0} − u_m` with the renewal
    /// sequence `u_m = Σ_k P(τ = k) u_{m−k}`; for `s ≥ 1`, `Kᵐf(s)` is
    /// `g_{m−s}` when `s < m` and `f(s − m) = π_K{0}` otherwise.
    fn renewal_equation_coeff(law: &RenewalLaw, m: usize) -> f64 {
        let k = FiniteKernel::renewal(law).unwrap();
        let pi = k.pi.as_ref().unwrap();
        let pi0 = pi[0];
        let tau = law.excursion_length_pmf();
        let mut u = alloc::vec![0.0; m + 1];
        u[0] = 1.0;
        for t in 1..=m {
            let mut acc = 0.0;
            for len in 2..=t.min(tau.len()) {
                acc += tau[len - 1] * u[t - len];
            }
            u[t] = acc;
        }
        let g = |t: usize| pi0 - u[t];
        let mut coeff = pi[0] * g(m).abs();
        for s in 1..pi.len() {
            let v = if s <= m { g(m - s) } else { pi0 };
            coeff += pi[s] * v.abs();
        }
        coeff
    }

    #[test]
    fn renewal_curve_matches_renewal_equation() {
        let law = RenewalLaw::new(3.0, 2000).unwrap();
        let obs = Observable::renewal_indicator(&law);
        let ns = [1u64, 2, 7, 50, 120];
        let c = exact_curve(&ChainModel::Renewal(law.clone()), &obs, &ns, ExactOptions::default()).unwrap();
        for e in &c.entries {
            let oracle = renewal_equation_coeff(&law, e.n as usize);
            assert!((e.coeff - oracle).abs() < 1e-12, "n={}: {} vs {oracle}", e.n, e.coeff);
        }
    }

    #[test]
    fn synthetic_power_law_fit() {
        let curve = MixingCurve {
            entries: (1..=20)
                .map(|n| MixingPoint { n, coeff: 7.0 * powf(n as f64, -2.0), stderr: 0.0, method: Method::Exact })
                .collect(),
            discretization_error: 0.0,
        };
        let f = rate_fit(&curve, 1, 20).unwrap();
        assert!((f.fit.slope + 2.0).abs() < 1e-12);
        assert!(f.fit.stderr < 1e-10);
        assert!(!f.faster_than_polynomial);
    }

    #[test]
    fn rate_fit_excludes_zeros_and_needs_five_points() {
        let mut entries: Vec<MixingPoint> = (1..=6)
            .map(|n| MixingPoint { n, coeff: 1.0 / n as f64, stderr: 0.0, method: Method::Exact })
            .collect();
        entries[2].coeff = 0.0;
        let curve = MixingCurve { entries, discretization_error: 0.0 };
        let f = rate_fit(&curve, 1, 6).unwrap();
        assert_eq!(f.excluded, alloc::vec![3]);
        assert!(rate_fit(&curve, 1, 5).is_err());
    }

    #[test]
    fn harris_discretized_kernel_is_stationary_and_bounded() {
        let h = HarrisParams::new(2.0, 1.0).unwrap();
        let k = FiniteKernel::harris(&h, 512).unwrap();
        let pi = k.pi.clone().unwrap();
        let mut out = alloc::vec![0.0; k.len()];
        for j in [0usize, 100, 511] {
            let mut e = alloc::vec![0.0; k.len()];
            e[j] = 1.0;
            k.apply(&e, &mut out);
            let image: f64 = pi.iter().zip(&out).map(|(a, b)| a * b).sum();
            assert!((image - pi[j]).abs() < 1e-15);
        }
        let obs = Observable::harris_power(&h);
        let ns: Vec<u64> = (4..=200).step_by(4).collect();
        let c = exact_curve(&ChainModel::Harris(h), &obs, &ns, ExactOptions { harris_bins: 1024 }).unwrap();
        for e in &c.entries {
            let cap = 6.0 * harris_pi_t_moment(&h, (e.n / 2) as u32);
            assert!(e.coeff <= cap + c.discretization_error, "n={}", e.n);
        }
    }

    #[test]
    fn mc_coefficient_agrees_with_exact_on_two_state() {
        let k = two_state();
        let obs = Observable::custom_table(alloc::vec![1.0, 0.0], &[0.75, 0.25]).unwrap();
        let chain = ChainModel::Table(k.clone());
        let exact = kernel_coefficients(&k, &centered_on_kernel(&k, &obs).unwrap(), &[3]).unwrap()[0];
        let opts = McOptions { starts: 4000, inner: 400, seed: 3, chunk: 500 };
        let mc = h1_coefficient_mc(&chain, &obs, 3, opts, &Sequential).unwrap();
        // inner noise biases |mean| upward by at most E|noise| ≈ 0.02
        assert!((mc.coeff - exact).abs() < 4.0 * mc.stderr + 0.03, "{} vs {exact}", mc.coeff);
        let few = McOptions { starts: 99, ..opts };
        assert!(h1_coefficient_mc(&chain, &obs, 3, few, &Sequential).is_err());
    }
}
