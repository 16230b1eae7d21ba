//! Right-hand sides of the deviation, concentration and moment inequalities,
//! evaluated term by term.
//!
//! Constants that the inequalities only assert to exist (`κ`, `C`, `C_p`,
//! the Rosenthal multiplier) are explicit arguments. Term labels are part of
//! the public contract and do not change.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::domain;
use crate::special::{exp, floor, gamma, ln, powf, sqrt};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub label: &'static str,
    pub value: f64,
}

/// An evaluated right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundBreakdown {
    pub op: &'static str,
    pub inputs: Vec<(&'static str, f64)>,
    pub terms: Vec<Term>,
    pub total: f64,
    pub regime: Option<String>,
    pub flags: Vec<String>,
    /// Diagnostics that are not additive terms (for instance the
    /// logarithmic variance factor of the `p = 2` concentration bound).
    pub aux: Vec<(&'static str, f64)>,
}

impl BoundBreakdown {
    fn new(op: &'static str, inputs: Vec<(&'static str, f64)>, terms: Vec<(&'static str, f64)>) -> Self {
        let terms: Vec<Term> = terms.into_iter().map(|(label, value)| Term { label, value }).collect();
        let total = terms.iter().map(|t| t.value).sum();
        Self { op, inputs, terms, total, regime: None, flags: Vec::new(), aux: Vec::new() }
    }

    pub fn term(&self, label: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.label == label).map(|t| t.value)
    }

    pub fn aux_value(&self, label: &str) -> Option<f64> {
        self.aux.iter().find(|(l, _)| *l == label).map(|(_, v)| *v)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain!("{name} must be positive and finite, got {v}"))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain!("{name} must be nonnegative and finite, got {v}"))
    }
}

/// `c · exp(−x²/(c · v))`, with the limits `c = 0 → 0` and `v = 0 → 0`.
fn scaled_gaussian(c: f64, x: f64, v: f64) -> f64 {
    if c == 0.0 || v == 0.0 {
        0.0
    } else {
        c * exp(-x * x / (c * v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModDevCase {
    PGt2,
    PEq2,
    PLt2,
}

impl ModDevCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModDevCase::PGt2 => "p_gt_2",
            ModDevCase::PEq2 => "p_eq_2",
            ModDevCase::PLt2 => "p_lt_2",
        }
    }

    pub fn for_p(p: f64) -> Self {
        if p > 2.0 {
            ModDevCase::PGt2
        } else if p == 2.0 {
            ModDevCase::PEq2
        } else {
            ModDevCase::PLt2
        }
    }
}

/// Moderate-deviation bound for `P(max_k |S_k| ≥ x)`.
///
/// `p > 2`: `κ n x^{−p} + κ exp(−κ^{−1}x²/n)`;
/// `p = 2`: `κ n x^{−2} + κ (n log n)^{r/2} x^{−r}` with `r ∈ (2, 4)`;
/// `1 < p < 2`: `κ n x^{−p}`.
pub fn moddev_bound(case: ModDevCase, n: f64, x: f64, p: f64, r: Option<f64>, kappa: f64) -> Result<BoundBreakdown> {
    positive("x", x)?;
    positive("n", n)?;
    nonnegative("kappa", kappa)?;
    let matches = match case {
        ModDevCase::PGt2 => p > 2.0,
        ModDevCase::PEq2 => p == 2.0,
        ModDevCase::PLt2 => p > 1.0 && p < 2.0,
    };
    if !matches {
        return Err(domain!("p = {p} does not belong to case {}", case.as_str()));
    }
    let poly = kappa * n * powf(x, -p);
    let mut inputs = vec![("n", n), ("x", x), ("p", p), ("kappa", kappa)];
    let terms = match case {
        ModDevCase::PGt2 => vec![("polynomial", poly), ("gaussian", scaled_gaussian(kappa, x, n))],
        ModDevCase::PEq2 => {
            let r = r.ok_or_else(|| domain!("case p_eq_2 requires r"))?;
            if !(r > 2.0 && r < 4.0) {
                return Err(domain!("r must lie in (2, 4), got {r}"));
            }
            inputs.push(("r", r));
            vec![("polynomial", poly), ("log_correction", kappa * powf(n * ln(n), r / 2.0) * powf(x, -r))]
        }
        ModDevCase::PLt2 => vec![("polynomial", poly)],
    };
    Ok(BoundBreakdown::new("moddev", inputs, terms))
}

/// `C {n/x^p + n^{r/2}/x^r + (n log n)^{r/2}/x^r 1_{p=2}}`.
pub fn rio_fn_bound(n: f64, x: f64, p: f64, r: f64, c: f64) -> Result<BoundBreakdown> {
    positive("x", x)?;
    positive("n", n)?;
    nonnegative("C", c)?;
    if p < 2.0 {
        return Err(domain!("p must be at least 2, got {p}"));
    }
    if r < 1.0 {
        return Err(domain!("r must be at least 1, got {r}"));
    }
    let mut terms = vec![
        ("polynomial", c * n * powf(x, -p)),
        ("rosenthal", c * powf(n, r / 2.0) * powf(x, -r)),
    ];
    if p == 2.0 {
        terms.push(("log_correction", c * powf(n * ln(n), r / 2.0) * powf(x, -r)));
    }
    Ok(BoundBreakdown::new("rio", vec![("n", n), ("x", x), ("p", p), ("r", r), ("C", c)], terms))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FukConstants {
    pub p: f64,
    pub beta: f64,
    pub c_star: f64,
    pub reverse: bool,
}

/// `β = p/(p+2)`, `c* = (1−β)²/(2eᵖ)`, or `(1−β)²/(8eᵖ)` for reverse
/// martingales.
pub fn fuk_constants(p: f64, reverse: bool) -> Result<FukConstants> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(domain!("p must be at least 2, got {p}"));
    }
    let beta = p / (p + 2.0);
    let denom = if reverse { 8.0 } else { 2.0 };
    let c_star = (1.0 - beta) * (1.0 - beta) / (denom * exp(p));
    Ok(FukConstants { p, beta, c_star, reverse })
}

/// Fuk's martingale inequality (forward or reverse) from precomputed sums:
/// `Σ P(|dᵢ| ≥ βx)`, `Σ ‖E(|dᵢ|ᵖ 1_{|dᵢ|≤βx} | F)‖∞`, `Σ ‖E(dᵢ² | F)‖∞`.
pub fn fuk_bound(
    p: f64,
    x: f64,
    sum_tail_probs: f64,
    sum_weak_caps: f64,
    sum_var_caps: f64,
    reverse: bool,
) -> Result<BoundBreakdown> {
    positive("x", x)?;
    nonnegative("sum_tail_probs", sum_tail_probs)?;
    nonnegative("sum_weak_caps", sum_weak_caps)?;
    nonnegative("sum_var_caps", sum_var_caps)?;
    let k = fuk_constants(p, reverse)?;
    let (lead, exp_factor) = if reverse { (powf(2.0, p + 1.0), 4.0) } else { (2.0, 2.0) };
    let truncated = lead / (powf(k.beta, p) * powf(x, p)) * sum_weak_caps;
    let variance = if sum_var_caps == 0.0 {
        0.0
    } else {
        exp_factor * exp(-k.c_star * x * x / sum_var_caps)
    };
    let mut b = BoundBreakdown::new(
        "fuk",
        vec![
            ("p", p),
            ("x", x),
            ("sum_tail_probs", sum_tail_probs),
            ("sum_weak_caps", sum_weak_caps),
            ("sum_var_caps", sum_var_caps),
            ("reverse", if reverse { 1.0 } else { 0.0 }),
        ],
        vec![
            ("tail_probabilities", sum_tail_probs),
            ("truncated_moments", truncated),
            ("variance_exponential", variance),
        ],
    );
    b.aux = vec![("beta", k.beta), ("c_star", k.c_star)];
    if sum_var_caps == 0.0 {
        b.flags.push("zero variance caps: exponential term taken at its limit 0".to_string());
    }
    Ok(b)
}

/// Default `C_p` for [`weak_fuk_bound`]: with `q = p + 1` and
/// `β̃ = q/(q+2)`, `max(β̃^{−p}, 2^{q+1} β̃^{−q} q β̃^{q−p}/(q−p))`.
pub fn weak_fuk_cp_default(p: f64) -> Result<f64> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(domain!("p must be at least 2, got {p}"));
    }
    let q = p + 1.0;
    let bt = q / (q + 2.0);
    let first = powf(bt, -p);
    let second = powf(2.0, q + 1.0) * powf(bt, -q) * q * powf(bt, q - p) / (q - p);
    Ok(first.max(second))
}

/// A `C_p` that also dominates the exponential term: the two polynomial
/// contributions added, and at least `1/c̃*_q` so that
/// `4exp(−c̃*_q x²/v) ≤ 4exp(−C_p^{−1}x²/v)`.
pub fn weak_fuk_cp_traced(p: f64) -> Result<f64> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(domain!("p must be at least 2, got {p}"));
    }
    let q = p + 1.0;
    let k = fuk_constants(q, true)?;
    let poly = powf(k.beta, -p) * (1.0 + powf(2.0, q + 1.0) * q / (q - p));
    Ok(poly.max(1.0 / k.c_star))
}

/// `(C_p/xᵖ) Σ Mᵢᵖ + 4 exp(−C_p^{−1} x²/v)`.
pub fn weak_fuk_bound(p: f64, x: f64, m_list: &[f64], var_cap_sum: f64, c_p: f64) -> Result<BoundBreakdown> {
    positive("x", x)?;
    if !(p >= 2.0) {
        return Err(domain!("p must be at least 2, got {p}"));
    }
    if !(c_p > 0.0) {
        return Err(domain!("C_p must be positive, got {c_p}"));
    }
    nonnegative("var_cap_sum", var_cap_sum)?;
    for &m in m_list {
        nonnegative("M_i", m)?;
    }
    let sum_mp: f64 = m_list.iter().map(|m| powf(*m, p)).sum();
    let variance = if var_cap_sum == 0.0 { 0.0 } else { 4.0 * exp(-x * x / (c_p * var_cap_sum)) };
    let mut b = BoundBreakdown::new(
        "weak_fuk",
        vec![("p", p), ("x", x), ("k", m_list.len() as f64), ("var_cap_sum", var_cap_sum), ("C_p", c_p)],
        vec![("weak_moments", c_p * powf(x, -p) * sum_mp), ("variance_exponential", variance)],
    );
    if var_cap_sum == 0.0 {
        b.flags.push("zero variance caps: exponential term taken at its limit 0".to_string());
    }
    Ok(b)
}

/// How the fourth Rosenthal input is supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaSum {
    /// `[Σ_k k^{−1−2δ/r}(Σᵢ …)^δ]^{r/(2δ)}`, already raised.
    Raised(f64),
    /// The bracket itself; it is raised to `r/(2δ)` here.
    Raw(f64),
}

/// `δ = min(1, 1/(r − 2))`.
pub fn rosenthal_delta(r: f64) -> Result<f64> {
    if !(r > 2.0) {
        return Err(domain!("r must exceed 2, got {r}"));
    }
    Ok((1.0f64).min(1.0 / (r - 2.0)))
}

/// The bracket `Σ_{k=1}^N k^{−1−2δ/r} (Σ_{i=2}^k aᵢ)^δ` from the sequence
/// `aᵢ = ‖E(Zᵢ²|G₀) − E(Zᵢ²)‖_{r/2}`, with `a[0]` holding `a₂`.
pub fn rosenthal_bracket(r: f64, a: &[f64]) -> Result<f64> {
    let delta = rosenthal_delta(r)?;
    let mut inner = 0.0;
    let mut acc = 0.0;
    // k = 1 has an empty inner sum
    for k in 2..=a.len() + 1 {
        inner += a[k - 2];
        acc += powf(k as f64, -1.0 - 2.0 * delta / r) * powf(inner, delta);
    }
    Ok(acc)
}

/// Four-term Rosenthal-type bound for `P(max_{i≤N} |S_i| ≥ x)`, times
/// `multiplier` (the unquantified constant depending on `r`).
#[allow(clippy::too_many_arguments)]
pub fn rosenthal_bound(
    r: f64,
    big_n: f64,
    x: f64,
    l1_coupling: f64,
    r_moment: f64,
    second_moment: f64,
    delta_sum: DeltaSum,
    multiplier: f64,
) -> Result<BoundBreakdown> {
    let delta = rosenthal_delta(r)?;
    positive("x", x)?;
    nonnegative("N", big_n)?;
    nonnegative("l1_coupling", l1_coupling)?;
    nonnegative("r_moment", r_moment)?;
    nonnegative("second_moment", second_moment)?;
    nonnegative("multiplier", multiplier)?;
    let (raised, raw_flag) = match delta_sum {
        DeltaSum::Raised(v) => {
            nonnegative("delta_sum", v)?;
            (v, false)
        }
        DeltaSum::Raw(v) => {
            nonnegative("delta_sum", v)?;
            (powf(v, r / (2.0 * delta)), true)
        }
    };
    let c = multiplier;
    let mut b = BoundBreakdown::new(
        "rosenthal",
        vec![
            ("r", r),
            ("N", big_n),
            ("x", x),
            ("l1_coupling", l1_coupling),
            ("r_moment", r_moment),
            ("second_moment", second_moment),
            ("multiplier", multiplier),
        ],
        vec![
            ("coupling", c * big_n / x * l1_coupling),
            ("r_moment", c * big_n * powf(x, -r) * r_moment),
            ("variance", c * powf(big_n, r / 2.0) * powf(x, -r) * powf(second_moment, r / 2.0)),
            ("conditional_variance", c * big_n * powf(x, -r) * raised),
        ],
    );
    b.aux = vec![("delta", delta)];
    if raw_flag {
        b.flags.push("delta sum supplied raw and raised to r/(2 delta)".to_string());
    }
    Ok(b)
}

/// `1 + log ΣLᵢ − ½ log ΣLᵢ²`, the variance factor of the `p = 2` case.
pub fn young_log_factor(l_list: &[f64]) -> Result<f64> {
    let s1: f64 = l_list.iter().sum();
    let s2: f64 = l_list.iter().map(|l| l * l).sum();
    if !(s1 > 0.0) {
        return Err(domain!("the p = 2 log factor needs a positive sum of Lipschitz constants"));
    }
    let v = 1.0 + ln(s1) - 0.5 * ln(s2);
    if !(v > 0.0) {
        return Err(domain!("log factor evaluated to {v} <= 0"));
    }
    Ok(v)
}

/// Concentration bound for separately Lipschitz functionals of a Young
/// tower with return-time weak moment of order `p`.
pub fn young_bound(p: f64, l_list: &[f64], x: f64, kappa: f64) -> Result<BoundBreakdown> {
    positive("x", x)?;
    nonnegative("kappa", kappa)?;
    if !(p > 1.0) {
        return Err(domain!("p must exceed 1, got {p}"));
    }
    for &l in l_list {
        nonnegative("L_i", l)?;
    }
    let sum_lp: f64 = l_list.iter().map(|l| powf(*l, p)).sum();
    let sum_l2: f64 = l_list.iter().map(|l| l * l).sum();
    let poly = kappa * sum_lp * powf(x, -p);
    let inputs = vec![("p", p), ("n", l_list.len() as f64), ("x", x), ("kappa", kappa)];
    let mut aux = Vec::new();
    let terms = if p > 2.0 {
        vec![("polynomial", poly), ("exponential", scaled_gaussian(kappa, x, sum_l2))]
    } else if p == 2.0 {
        let lf = young_log_factor(l_list)?;
        aux.push(("log_factor", lf));
        aux.push(("variance_proxy", sum_l2 * lf));
        vec![("polynomial", poly), ("exponential", scaled_gaussian(kappa, x, sum_l2 * lf))]
    } else {
        vec![("polynomial", poly)]
    };
    let mut b = BoundBreakdown::new("young", inputs, terms);
    b.aux = aux;
    Ok(b)
}

/// `M_kᵖ = C Σ_{j≤k} L_jᵖ c⁰_{k−j} + C sup_{1≤h≤k+1} (h^{−1} Σ_{j=k−h+1}^k L_j)ᵖ`.
///
/// Entries of `c0` past its end count as zero.
pub fn maximal_mk(l_list: &[f64], c0: &[f64], c: f64, k: usize, p: f64) -> Result<f64> {
    if k >= l_list.len() {
        return Err(domain!("k = {k} is out of range for {} Lipschitz constants", l_list.len()));
    }
    if c0.iter().any(|v| !(*v >= 0.0)) {
        return Err(domain!("c0 must be nonnegative"));
    }
    let conv: f64 = (0..=k).map(|j| powf(l_list[j], p) * c0.get(k - j).copied().unwrap_or(0.0)).sum();
    Ok(c * conv + c * powf(maximal_average(l_list, k), p))
}

/// `sup_{1≤h≤k+1} h^{−1} Σ_{j=k−h+1}^k L_j`.
pub fn maximal_average(l_list: &[f64], k: usize) -> f64 {
    let mut acc = 0.0;
    let mut best = 0.0f64;
    for h in 1..=k + 1 {
        acc += l_list[k + 1 - h];
        best = best.max(acc / h as f64);
    }
    best
}

/// Default summable sequence `c⁰_k = (k + 1)^{−2}`.
pub fn default_c0(len: usize) -> Vec<f64> {
    (0..len).map(|k| 1.0 / ((k + 1) as f64 * (k + 1) as f64)).collect()
}

/// Block sizes of the partial-sum decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockParams {
    pub n: u64,
    pub x: f64,
    pub p: f64,
    pub f_inf: f64,
    pub kappa: f64,
    /// `⌊n^{1/p}⌋`.
    pub t: u64,
    /// `⌊x / (2‖f‖∞ n^{1/p})⌋`.
    pub u: u64,
    /// `⌊n/t⌋`.
    pub n_t: u64,
    /// `⌊⌊n_t/2⌋ / u⌋` (zero when `u = 0`).
    pub n_u: u64,
    /// `max(2κn, 16 x n^{1/p} ‖f‖∞)`.
    pub y_p_gt_2: f64,
    /// `max(2κ n log n, 16 x (n log n)^{1/2} ‖f‖∞)`.
    pub y_p_eq_2: f64,
    /// `x < 2‖f‖∞ n^{1/p}`.
    pub trivial_low: bool,
    /// `x > ‖f‖∞ n / 4`.
    pub trivial_high: bool,
}

impl BlockParams {
    pub fn nontrivial(&self) -> bool {
        !self.trivial_low && !self.trivial_high
    }

    /// The regime as a label.
    pub fn regime(&self) -> &'static str {
        match (self.trivial_low, self.trivial_high) {
            (false, false) => "block",
            (true, false) => "trivial: x < 2|f| n^(1/p)",
            (false, true) => "trivial: x > |f| n / 4",
            (true, true) => "trivial: both",
        }
    }
}

/// `⌊n^{1/p}⌋`, corrected for rounding of the real root.
pub fn integer_root(n: u64, p: f64) -> u64 {
    let mut t = floor(powf(n as f64, 1.0 / p)) as u64;
    while t > 0 && powf(t as f64, p) > n as f64 * (1.0 + 1e-12) {
        t -= 1;
    }
    while powf((t + 1) as f64, p) <= n as f64 * (1.0 + 1e-12) {
        t += 1;
    }
    t
}

pub fn block_parameters(n: u64, x: f64, p: f64, f_inf: f64, kappa: f64) -> Result<BlockParams> {
    if n < 1 {
        return Err(domain!("n must be at least 1"));
    }
    positive("x", x)?;
    positive("f_inf", f_inf)?;
    if !(p > 1.0) {
        return Err(domain!("p must exceed 1, got {p}"));
    }
    nonnegative("kappa", kappa)?;
    let nf = n as f64;
    let root = powf(nf, 1.0 / p);
    let t = integer_root(n, p).max(1);
    let u = floor(x / (2.0 * f_inf * root)) as u64;
    let n_t = n / t;
    let n_u = (n_t / 2).checked_div(u).unwrap_or(0);
    let log_n = ln(nf);
    let params = BlockParams {
        n,
        x,
        p,
        f_inf,
        kappa,
        t,
        u,
        n_t,
        n_u,
        y_p_gt_2: (2.0 * kappa * nf).max(16.0 * x * root * f_inf),
        y_p_eq_2: (2.0 * kappa * nf * log_n).max(16.0 * x * sqrt(nf * log_n) * f_inf),
        trivial_low: x < 2.0 * f_inf * root,
        trivial_high: x > f_inf * nf / 4.0,
    };
    if params.nontrivial() {
        debug_assert!(params.u >= 1 && params.n_t >= 4 * params.u);
        debug_assert!(2.0 * f_inf * (t * u) as f64 <= x * (1.0 + 1e-12));
    }
    Ok(params)
}

/// `2exp(−9x²/(16y))` and `2exp(−9x/(16‖f‖∞ n^{1/p}))`.
pub fn freedman_terms(x: f64, y: f64, f_inf: f64, n: f64, p: f64) -> Result<BoundBreakdown> {
    positive("x", x)?;
    if !(y > 0.0) {
        return Err(domain!("y must be positive, got {y}"));
    }
    positive("f_inf", f_inf)?;
    positive("n", n)?;
    if !(p > 1.0) {
        return Err(domain!("p must exceed 1, got {p}"));
    }
    let first = if y.is_infinite() { 2.0 } else { 2.0 * exp(-9.0 * x * x / (16.0 * y)) };
    Ok(BoundBreakdown::new(
        "freedman",
        vec![("x", x), ("y", y), ("f_inf", f_inf), ("n", n), ("p", p)],
        vec![
            ("variance_exponential", first),
            ("increment_exponential", 2.0 * exp(-9.0 * x / (16.0 * f_inf * powf(n, 1.0 / p)))),
        ],
    ))
}

/// `C_{p,γ} = ¼ (c η / 48)ᵖ p Γ(p)` with `c = a/(a+γ)`, `a = p − 1` and
/// `η = 1 − (c/2)^{1/γ}`.
pub fn harris_lower_constant(p: f64, gamma_exp: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(domain!("p must exceed 1, got {p}"));
    }
    if !(gamma_exp > 0.0) {
        return Err(domain!("gamma must be positive, got {gamma_exp}"));
    }
    let a = p - 1.0;
    let c = a / (a + gamma_exp);
    let eta = 1.0 - powf(c / 2.0, 1.0 / gamma_exp);
    Ok(0.25 * powf(c * eta / 48.0, p) * p * gamma(p))
}
