//! Exemplar chains: the renewal chain on ℕ, the Harris chain on `[0, 1]`,
//! the doubling chain, and finite transition tables.
//!
//! Each chain comes with its exact stationary law, a one-step sampler, and
//! (for the regenerative ones) an excursion sampler.

use alloc::format;
use alloc::vec::Vec;
use rand_core::RngCore;

use crate::error::domain;
use crate::mixing::FiniteKernel;
use crate::rng::{coin, open01};
use crate::special::{ln, ln_1p, power_tail_sum, powf, zeta};
use crate::{Error, Result};

/// Accuracy requested from every ζ evaluation.
pub const ZETA_TOL: f64 = 1e-13;

/// Default truncation of the renewal jump law.
pub const DEFAULT_TRUNCATION: usize = 1_000_000;

pub use crate::special::zeta as zeta_fn;

/// Inverse-CDF sampler over `{0, …, len − 1}` from a cumulative table.
///
/// The first few cells are scanned linearly (the exemplar laws put almost
/// all their mass there), then a binary search takes over.
#[derive(Debug, Clone)]
pub struct DiscreteSampler {
    cumulative: Vec<f64>,
}

impl DiscreteSampler {
    const LINEAR_SCAN: usize = 16;

    /// Builds from nonnegative weights; they are normalized by their sum.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.is_empty() || !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(domain!("sampler weights must be nonnegative with positive sum"));
        }
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc / total
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Self { cumulative })
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Index `i` such that `cumulative[i-1] < u ≤ cumulative[i]`.
    #[inline]
    pub fn index_for(&self, u: f64) -> usize {
        let c = &self.cumulative;
        let scan = Self::LINEAR_SCAN.min(c.len());
        for (i, &ci) in c[..scan].iter().enumerate() {
            if u <= ci {
                return i;
            }
        }
        scan + c[scan..].partition_point(|&ci| ci < u).min(c.len() - scan - 1)
    }

    #[inline]
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        self.index_for(open01(rng))
    }
}

/// Law of the renewal chain: from 0 jump to `n ≥ 1` with probability
/// `1/(ζ(p+1) n^{p+1})`, from `n > 0` step down to `n − 1`.
///
/// Jumps are truncated at `truncation_n`; the missing mass is reported as
/// `tail_tol`, and samplers draw from the renormalized truncated law.
#[derive(Debug, Clone)]
pub struct RenewalLaw {
    pub p: f64,
    pub truncation_n: usize,
    pub zeta_p: f64,
    pub zeta_p1: f64,
    /// Normalizer of the stationary law, `1/(ζ(p) + ζ(p+1))`.
    pub d: f64,
    pub pi0: f64,
    /// `jump_pmf[n - 1]` is the probability of jumping from 0 to `n`.
    pub jump_pmf: Vec<f64>,
    /// `pi_pmf[n]` for `n = 0..=truncation_n`.
    pub pi_pmf: Vec<f64>,
    /// Mean return time to 0, from the jump table plus its analytic tail.
    pub mean_tau: f64,
    /// Jump mass beyond the truncation.
    pub tail_tol: f64,
    jump_sampler: DiscreteSampler,
    pi_sampler: DiscreteSampler,
}

impl RenewalLaw {
    pub fn new(p: f64, truncation_n: usize) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(domain!("renewal law requires p > 1, got {p}"));
        }
        if truncation_n < 2 {
            return Err(domain!("renewal law requires truncation N >= 2, got {truncation_n}"));
        }
        let zeta_p = zeta(p, ZETA_TOL)?;
        let zeta_p1 = zeta(p + 1.0, ZETA_TOL)?;
        let d = 1.0 / (zeta_p + zeta_p1);
        let pi0 = d * zeta_p1;
        let big_n = truncation_n;

        let raw: Vec<f64> = (1..=big_n).map(|n| powf(n as f64, -(p + 1.0))).collect();
        let jump_pmf: Vec<f64> = raw.iter().map(|r| r / zeta_p1).collect();

        // tails Σ_{i ≥ n} i^{-(p+1)}, accumulated from the far end
        let beyond = power_tail_sum(p + 1.0, big_n as u64 + 1);
        let mut pi_pmf = alloc::vec![0.0; big_n + 1];
        let mut acc = beyond;
        for n in (1..=big_n).rev() {
            acc += raw[n - 1];
            pi_pmf[n] = d * acc;
        }
        pi_pmf[0] = pi_pmf[1];

        let tail_tol = beyond / zeta_p1;
        let mut mean_jump = power_tail_sum(p, big_n as u64 + 1) / zeta_p1;
        for n in (1..=big_n).rev() {
            mean_jump += n as f64 * jump_pmf[n - 1];
        }
        let mean_tau = 1.0 + mean_jump;

        let jump_sampler = DiscreteSampler::from_weights(&jump_pmf)?;
        let pi_sampler = DiscreteSampler::from_weights(&pi_pmf)?;
        Ok(Self {
            p,
            truncation_n,
            zeta_p,
            zeta_p1,
            d,
            pi0,
            jump_pmf,
            pi_pmf,
            mean_tau,
            tail_tol,
            jump_sampler,
            pi_sampler,
        })
    }

    /// Closed form `E(τ) = 1 + ζ(p)/ζ(p+1)` of the untruncated law.
    pub fn mean_tau_closed(&self) -> f64 {
        1.0 + self.zeta_p / self.zeta_p1
    }

    /// `|E(τ)·π{0} − 1|` with `E(τ)` from the jump table (Kac consistency).
    pub fn kac_defect(&self) -> f64 {
        (self.mean_tau * self.pi0 - 1.0).abs()
    }

    /// Analytic bound `N^{-p}/(p ζ(p+1))` on the truncated jump mass.
    pub fn tail_bound(&self) -> f64 {
        powf(self.truncation_n as f64, -self.p) / (self.p * self.zeta_p1)
    }

    /// Mean return time under the renormalized truncated jump law.
    pub fn truncated_mean_tau(&self) -> f64 {
        let mass: f64 = self.jump_pmf.iter().sum();
        let first: f64 = self.jump_pmf.iter().enumerate().map(|(i, w)| (i + 1) as f64 * w).sum();
        1.0 + first / mass
    }

    /// `P(τ = k)` for the renormalized truncated law, as a pmf over
    /// `{1, …, N + 1}` (index `k − 1`).
    pub fn excursion_length_pmf(&self) -> Vec<f64> {
        let mass: f64 = self.jump_pmf.iter().sum();
        let mut pmf = alloc::vec![0.0; self.truncation_n + 1];
        for (i, w) in self.jump_pmf.iter().enumerate() {
            pmf[i + 1] = w / mass;
        }
        pmf
    }

    /// Draws a jump height from the truncated law.
    #[inline]
    pub fn sample_jump<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        self.jump_sampler.sample(rng) + 1
    }

    #[inline]
    pub fn sample_stationary<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        self.pi_sampler.sample(rng)
    }
}

/// One step of the renewal chain.
#[inline]
pub fn renewal_step<R: RngCore + ?Sized>(law: &RenewalLaw, state: usize, rng: &mut R) -> usize {
    if state > 0 {
        state - 1
    } else {
        law.sample_jump(rng)
    }
}

/// One regeneration cycle: `(mark, length)` from the chain's regeneration
/// structure. For the renewal chain the mark is the jump height and the
/// length is the return time to 0; for the Harris chain the mark is the
/// state entered at the regeneration and the length is the holding time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcursionSample {
    pub mark: f64,
    pub length: u64,
}

/// Excursion from 0: jump `J`, then `J` deterministic steps down.
pub fn renewal_excursion<R: RngCore + ?Sized>(law: &RenewalLaw, rng: &mut R) -> ExcursionSample {
    let j = law.sample_jump(rng);
    ExcursionSample { mark: j as f64, length: j as u64 + 1 }
}

/// Parameters of the Harris chain `K(x, ·) = (1 − x)δ_x + xν` with
/// `ν = (1 + a)x^a dx`, `π = a x^{a−1} dx` and `a = p − 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarrisParams {
    pub p: f64,
    pub a: f64,
    pub gamma: f64,
    /// `E_π(Y^γ) = a/(a + γ)`.
    pub c_a_gamma: f64,
}

impl HarrisParams {
    pub fn new(p: f64, gamma: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(domain!("Harris chain requires p > 1, got {p}"));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(domain!("Harris observable requires gamma > 0, got {gamma}"));
        }
        let a = p - 1.0;
        Ok(Self { p, a, gamma, c_a_gamma: a / (a + gamma) })
    }

    /// Draw from ν by inversion of its CDF `x^{a+1}`.
    #[inline]
    pub fn sample_nu<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        powf(open01(rng), 1.0 / (self.a + 1.0))
    }

    /// Draw from π by inversion of its CDF `x^a`.
    #[inline]
    pub fn sample_pi<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        powf(open01(rng), 1.0 / self.a)
    }

    /// `E(τ) = p/(p − 1)`.
    pub fn mean_excursion(&self) -> f64 {
        self.p / (self.p - 1.0)
    }
}

/// One step of the Harris chain. `x = 0` is an absorbing point that π and ν
/// never charge.
#[inline]
pub fn harris_step<R: RngCore + ?Sized>(params: &HarrisParams, x: f64, rng: &mut R) -> f64 {
    if open01(rng) < x {
        params.sample_nu(rng)
    } else {
        x
    }
}

/// Number of trials up to and including the first success of a
/// Bernoulli(`success`) sequence: `P(G = k) = (1 − success)^{k−1} success`.
#[inline]
pub fn geometric<R: RngCore + ?Sized>(success: f64, rng: &mut R) -> u64 {
    if success >= 1.0 {
        return 1;
    }
    if success <= 0.0 {
        return u64::MAX;
    }
    let g = ln(open01(rng)) / ln_1p(-success);
    if g >= 1.8e19 {
        u64::MAX
    } else {
        1 + g as u64
    }
}

/// Regeneration cycle of the Harris chain: the entered state `Y ~ ν` and
/// the holding time, geometric with success probability `Y` (mean `1/Y`).
pub fn harris_excursion<R: RngCore + ?Sized>(params: &HarrisParams, rng: &mut R) -> ExcursionSample {
    let y = params.sample_nu(rng);
    ExcursionSample { mark: y, length: geometric(y, rng) }
}

/// One step of the doubling chain `x ↦ (x + ξ)/2`.
#[inline]
pub fn doubling_step<R: RngCore + ?Sized>(x: f64, rng: &mut R) -> f64 {
    let xi = if coin(rng) { 1.0 } else { 0.0 };
    (x + xi) / 2.0
}

/// State of a chain: integer-valued or real-valued.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum State {
    Discrete(usize),
    Continuous(f64),
}

/// The chains the toolkit knows how to simulate.
#[derive(Debug, Clone)]
pub enum ChainModel {
    Renewal(RenewalLaw),
    Harris(HarrisParams),
    Doubling,
    /// Independent-return product tower: its base returns are i.i.d. with
    /// the renewal excursion law, so it is simulated through the renewal
    /// chain.
    Tower(RenewalLaw),
    /// A finite transition table. Stationary sampling needs `pi`.
    Table(FiniteKernel),
}

impl ChainModel {
    pub fn name(&self) -> &'static str {
        match self {
            ChainModel::Renewal(_) => "renewal",
            ChainModel::Harris(_) => "harris",
            ChainModel::Doubling => "doubling",
            ChainModel::Tower(_) => "tower",
            ChainModel::Table(_) => "table",
        }
    }

    pub fn renewal_law(&self) -> Option<&RenewalLaw> {
        match self {
            ChainModel::Renewal(l) | ChainModel::Tower(l) => Some(l),
            _ => None,
        }
    }

    /// The observable each built-in chain is studied with.
    pub fn default_observable(&self) -> Result<Observable> {
        match self {
            ChainModel::Renewal(l) | ChainModel::Tower(l) => Ok(Observable::renewal_indicator(l)),
            ChainModel::Harris(h) => Ok(Observable::harris_power(h)),
            ChainModel::Doubling => Ok(Observable::identity()),
            ChainModel::Table(_) => {
                Err(Error::Unsupported("table chains need an explicit observable".into()))
            }
        }
    }

    pub fn stationary_sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<State> {
        stationary_sample(self, rng)
    }

    pub fn step<R: RngCore + ?Sized>(&self, state: State, rng: &mut R) -> Result<State> {
        match (self, state) {
            (ChainModel::Renewal(l) | ChainModel::Tower(l), State::Discrete(s)) => {
                Ok(State::Discrete(renewal_step(l, s, rng)))
            }
            (ChainModel::Harris(h), State::Continuous(x)) if (0.0..=1.0).contains(&x) => {
                Ok(State::Continuous(harris_step(h, x, rng)))
            }
            (ChainModel::Doubling, State::Continuous(x)) if (0.0..1.0).contains(&x) => {
                Ok(State::Continuous(doubling_step(x, rng)))
            }
            (ChainModel::Table(k), State::Discrete(s)) if s < k.len() => {
                Ok(State::Discrete(k.sample_row(s, rng)))
            }
            (chain, state) => Err(Error::Lookup(format!(
                "{state:?} is not a state of the {} chain",
                chain.name()
            ))),
        }
    }
}

/// Draw from the chain's stationary law.
pub fn stationary_sample<R: RngCore + ?Sized>(chain: &ChainModel, rng: &mut R) -> Result<State> {
    match chain {
        ChainModel::Renewal(l) | ChainModel::Tower(l) => Ok(State::Discrete(l.sample_stationary(rng))),
        ChainModel::Harris(h) => Ok(State::Continuous(h.sample_pi(rng))),
        ChainModel::Doubling => Ok(State::Continuous(open01(rng))),
        ChainModel::Table(k) => match k.stationary_sampler() {
            Some(s) => Ok(State::Discrete(s.sample(rng))),
            None => Err(Error::Unsupported(
                "table chain has no stationary law to sample from".into(),
            )),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservableKind {
    /// `f(n) = π{0} − 1_{n=0}` on the renewal chain.
    RenewalIndicator,
    /// `f(y) = y^γ − c_{a,γ}` on the Harris chain.
    HarrisPower { gamma: f64 },
    /// `f(x) = x − 1/2` on the doubling chain.
    Identity,
    /// `f(s) = values[s] − centering` on a finite state space.
    CustomTable { values: Vec<f64> },
}

/// A bounded observable together with the mean it is centered by.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub kind: ObservableKind,
    pub centering: f64,
    /// Sup norm of the centered observable.
    pub sup_norm: f64,
}

impl Observable {
    pub fn renewal_indicator(law: &RenewalLaw) -> Self {
        let pi0 = law.pi0;
        Self {
            kind: ObservableKind::RenewalIndicator,
            centering: pi0,
            sup_norm: pi0.max(1.0 - pi0),
        }
    }

    pub fn harris_power(params: &HarrisParams) -> Self {
        let c = params.c_a_gamma;
        Self {
            kind: ObservableKind::HarrisPower { gamma: params.gamma },
            centering: c,
            sup_norm: c.max(1.0 - c),
        }
    }

    pub fn identity() -> Self {
        Self { kind: ObservableKind::Identity, centering: 0.5, sup_norm: 0.5 }
    }

    /// Table observable centered by the weighted mean under `pi`.
    pub fn custom_table(values: Vec<f64>, pi: &[f64]) -> Result<Self> {
        if values.len() != pi.len() || values.is_empty() {
            return Err(domain!("observable table and stationary weights differ in length"));
        }
        let centering: f64 = values.iter().zip(pi).map(|(v, w)| v * w).sum();
        let sup_norm = values.iter().map(|v| (v - centering).abs()).fold(0.0, f64::max);
        Ok(Self { kind: ObservableKind::CustomTable { values }, centering, sup_norm })
    }

    /// Raw (uncentered) value at an integer state.
    #[inline]
    pub fn raw_discrete(&self, s: usize) -> Result<f64> {
        match &self.kind {
            ObservableKind::RenewalIndicator => Ok(if s == 0 { 1.0 } else { 0.0 }),
            ObservableKind::CustomTable { values } => values
                .get(s)
                .copied()
                .ok_or_else(|| Error::Lookup(format!("state {s} outside observable table"))),
            _ => Err(Error::Lookup(format!("observable is not defined on integer state {s}"))),
        }
    }

    /// Centered value at an integer state.
    #[inline]
    pub fn centered_discrete(&self, s: usize) -> Result<f64> {
        match self.kind {
            // f(n) = π{0} − 1_{n=0} is already centered
            ObservableKind::RenewalIndicator => Ok(if s == 0 { self.centering - 1.0 } else { self.centering }),
            _ => Ok(self.raw_discrete(s)? - self.centering),
        }
    }

    #[inline]
    pub fn centered_continuous(&self, x: f64) -> Result<f64> {
        match self.kind {
            ObservableKind::HarrisPower { gamma } => Ok(powf(x, gamma) - self.centering),
            ObservableKind::Identity => Ok(x - self.centering),
            _ => Err(Error::Lookup(format!("observable is not defined on real state {x}"))),
        }
    }
}

/// Centered observable value at a state.
pub fn observable_value(obs: &Observable, state: State) -> Result<f64> {
    match state {
        State::Discrete(s) => obs.centered_discrete(s),
        State::Continuous(x) => obs.centered_continuous(x),
    }
}
