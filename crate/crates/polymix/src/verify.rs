//! Verification suites. Each check is one JSON line
//! `{check, inputs, observed, target, tolerance, pass}`.

use std::f64::consts::E;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

use polymix_core::bounds::{fuk_constants, harris_lower_constant, young_bound};
use polymix_core::chains::zeta_fn;
use polymix_core::special::{beta_int, gamma, powf};
use polymix_core::tails::ChunkRunner;
use polymix_core::Result;

use crate::experiments::{self as ex, Sizes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Kac,
    Oracle,
    LowerBound,
    Scaling,
    Limits,
    Blocks,
    Quadrature,
}

impl Suite {
    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Kac => "kac",
            Suite::Oracle => "oracle",
            Suite::LowerBound => "lower_bound",
            Suite::Scaling => "scaling",
            Suite::Limits => "limits",
            Suite::Blocks => "blocks",
            Suite::Quadrature => "quadrature",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub check: String,
    pub inputs: Value,
    pub observed: Value,
    pub target: Value,
    pub tolerance: Value,
    pub pass: bool,
}

impl Check {
    fn new(check: impl Into<String>, inputs: Value, observed: impl Serialize, target: impl Serialize, tolerance: impl Serialize, pass: bool) -> Self {
        Self {
            check: check.into(),
            inputs,
            observed: json!(observed),
            target: json!(target),
            tolerance: json!(tolerance),
            pass,
        }
    }

    /// `|observed − target| ≤ tolerance`.
    fn near(check: impl Into<String>, inputs: Value, observed: f64, target: f64, tolerance: f64) -> Self {
        let pass = (observed - target).abs() <= tolerance;
        Self::new(check, inputs, observed, target, tolerance, pass)
    }
}

/// Which chain a suite is restricted to, and the sizes it runs at.
#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub chain: Option<crate::config::ChainKind>,
    pub p: Option<f64>,
    pub gamma: Option<f64>,
    pub seed: u64,
    pub sizes: Sizes,
}

pub fn run_suite<C: ChunkRunner>(suite: Suite, opts: &SuiteOptions, runner: &C) -> Result<Vec<Check>> {
    use crate::config::ChainKind;
    let want = |k: ChainKind| opts.chain.is_none() || opts.chain == Some(k);
    let mut out = Vec::new();
    match suite {
        Suite::Kac => {
            if want(ChainKind::Renewal) {
                let ps = match opts.p {
                    Some(p) => vec![p],
                    None => vec![1.5, 2.0, 3.0, 4.0],
                };
                for p in ps {
                    out.extend(kac_checks(p)?);
                }
            }
            if want(ChainKind::Harris) {
                out.extend(harris_identity_checks(opts.p.unwrap_or(2.0), opts.gamma.unwrap_or(1.0), opts, runner)?);
            }
        }
        Suite::Oracle => out.push(oracle_check(opts, runner)?),
        Suite::LowerBound => {
            if want(ChainKind::Renewal) {
                out.extend(x_scaling_checks(opts.p.unwrap_or(3.0), opts, runner)?);
            }
            if want(ChainKind::Harris) {
                out.push(harris_floor_check(opts.p.unwrap_or(2.0), opts.gamma.unwrap_or(1.0), opts, runner)?);
            }
        }
        Suite::Scaling => {
            let p = opts.p.unwrap_or(3.0);
            out.push(mixing_rate_check(p)?);
            out.push(n_scaling_check(p, opts, runner)?);
            out.push(domination_check(p, opts, runner)?);
            out.push(young_check(p, opts, runner)?);
        }
        Suite::Limits => out.extend(limit_checks(opts, runner)?),
        Suite::Blocks => out.extend(block_checks(opts, runner)?),
        Suite::Quadrature => {
            out.extend(quadrature_checks());
            out.extend(doubling_checks()?);
            out.extend(constant_checks()?);
        }
    }
    Ok(out)
}

pub fn kac_checks(p: f64) -> Result<Vec<Check>> {
    let k = ex::kac(p, ex::N_TRUNC)?;
    let closed = 1.0 + zeta_fn(p, 1e-13)? / zeta_fn(p + 1.0, 1e-13)?;
    let inputs = json!({"p": p, "truncation_N": ex::N_TRUNC});
    Ok(vec![
        Check::near("kac_consistency", inputs.clone(), (k.mean_tau * k.pi0 - 1.0).abs(), 0.0, 1e-6),
        Check::near("kac_closed_form", inputs, k.mean_tau, closed, 10.0 * k.tail_tol.max(1e-12)),
    ])
}

fn harris_identity_checks<C: ChunkRunner>(p: f64, g: f64, opts: &SuiteOptions, runner: &C) -> Result<Vec<Check>> {
    let ells = [2u64, 5, 10, 20];
    let h = ex::harris_identities(p, g, opts.sizes.harris_excursions, &ells, opts.seed, runner)?;
    let inputs = json!({"p": p, "gamma": g, "draws": opts.sizes.harris_excursions, "seed": opts.seed});
    let mut out = vec![
        Check::near("harris_mean_tau", inputs.clone(), h.mean_tau.mean, p / (p - 1.0), 3.0 * h.mean_tau.stderr),
        Check::near("harris_mean_power", inputs.clone(), h.mean_power.mean, h.params.c_a_gamma, 3.0 * h.mean_power.stderr),
    ];
    let a = h.params.a;
    for (ell, m) in &h.tails {
        // P(τ ≥ ℓ) = E(1 − Y)^{ℓ−1} with Y ~ ν
        let exact = (a + 1.0) * beta_int(a, (*ell - 1) as u32);
        let mut inp = inputs.clone();
        inp["ell"] = json!(ell);
        out.push(Check::near(format!("harris_tau_tail_{ell}"), inp.clone(), m.mean, exact, 3.0 * m.stderr));
        if p == 2.0 {
            let bound = 2.0 / (*ell as f64 * *ell as f64);
            out.push(Check::new(
                format!("harris_tau_tail_bound_{ell}"),
                inp,
                m.mean,
                json!({"at_most": bound}),
                3.0 * m.stderr,
                m.mean <= bound + 3.0 * m.stderr,
            ));
        }
    }
    Ok(out)
}

pub const ORACLE_THRESHOLDS: std::ops::RangeInclusive<u64> = 13..=32;

fn oracle_check<C: ChunkRunner>(opts: &SuiteOptions, runner: &C) -> Result<Check> {
    let th: Vec<u64> = ORACLE_THRESHOLDS.collect();
    let pts = ex::oracle_equivalence(3.0, 50, 6, &th, opts.sizes.oracle_trials, opts.seed, runner)?;
    let within = pts.iter().filter(|q| (q.estimate.p_hat - q.exact).abs() <= 3.0 * q.estimate.half_width()).count();
    let frac = within as f64 / pts.len() as f64;
    Ok(Check::new(
        "oracle_equivalence",
        json!({"p": 3.0, "K": 50, "n": 6, "thresholds": th, "trials": opts.sizes.oracle_trials, "seed": opts.seed}),
        frac,
        json!({"at_least": 0.95}),
        "3 Wilson half-widths per point",
        frac >= 0.95,
    ))
}

fn x_scaling_checks<C: ChunkRunner>(p: f64, opts: &SuiteOptions, runner: &C) -> Result<Vec<Check>> {
    let n = 10_000;
    let r = ex::renewal_x_scaling(p, n, 10, opts.sizes.lower_trials, opts.seed, runner)?;
    let inputs = json!({"p": p, "n": n, "grid": "bandwidth:10", "trials": opts.sizes.lower_trials, "seed": opts.seed});
    let slope = match &r.fit {
        Ok(f) => Check::near("x_exponent", inputs.clone(), f.fit.slope, -p, 0.4),
        Err(e) => Check::new("x_exponent", inputs.clone(), e.to_string(), -p, 0.4, false),
    };
    let ratios: Vec<f64> = r.estimates.iter().map(|e| e.p_hat * e.x.powf(p) / n as f64).collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    let spread = hi / lo;
    let spread_check = Check::new(
        "ratio_spread",
        inputs,
        json!({"max_over_min": if spread.is_finite() { json!(spread) } else { json!("unbounded") }, "ratios": ratios}),
        json!({"at_most": 10.0}),
        json!(null),
        spread <= 10.0,
    );
    Ok(vec![slope, spread_check])
}

fn harris_floor_check<C: ChunkRunner>(p: f64, g: f64, opts: &SuiteOptions, runner: &C) -> Result<Check> {
    let n = 10_000;
    let r = ex::harris_lower(p, g, n, 10, opts.sizes.harris_tail_trials, opts.seed, runner)?;
    let worst = r.points.iter().map(|(e, floor)| e.p_hat / (0.5 * floor)).fold(f64::INFINITY, f64::min);
    Ok(Check::new(
        "harris_lower_floor",
        json!({"p": p, "gamma": g, "n": n, "grid": "bandwidth:10", "trials": opts.sizes.harris_tail_trials, "C": r.constant}),
        json!({"min_ratio_to_half_floor": worst}),
        json!({"at_least": 1.0}),
        json!(null),
        worst >= 1.0,
    ))
}

fn mixing_rate_check(p: f64) -> Result<Check> {
    let (_, fit) = ex::renewal_mixing(p, 50, 500)?;
    Ok(Check::near("mixing_rate_renewal", json!({"p": p, "n_min": 50, "n_max": 500}), fit.fit.slope, -(p - 1.0), 0.25))
}

pub const N_SCALING_NS: [u64; 4] = [1_000, 3_000, 10_000, 30_000];

fn n_scaling_check<C: ChunkRunner>(p: f64, opts: &SuiteOptions, runner: &C) -> Result<Check> {
    let alpha = 0.6;
    let r = ex::renewal_n_scaling(p, alpha, 4.0, &N_SCALING_NS, opts.sizes.nscale_trials, opts.seed, runner)?;
    let inputs = json!({"p": p, "alpha": alpha, "c": 4.0, "n": N_SCALING_NS, "trials": opts.sizes.nscale_trials,
        "hits": r.estimates.iter().map(|e| e.hits).collect::<Vec<_>>()});
    let target = 1.0 - alpha * p;
    Ok(match &r.fit {
        Ok(f) => Check::near("n_exponent", inputs, f.fit.slope, target, 0.3),
        Err(e) => Check::new("n_exponent", inputs, e.to_string(), target, 0.3, false),
    })
}

fn domination_check<C: ChunkRunner>(p: f64, opts: &SuiteOptions, runner: &C) -> Result<Check> {
    let ns = [3_000u64, 10_000];
    let d = ex::renewal_domination(p, &ns, 6, opts.sizes.domination_trials, opts.seed, runner)?;
    let ok = d.test.iter().filter(|(e, b)| *b >= e.p_hat - 2.0 * e.half_width()).count();
    Ok(Check::new(
        "upper_domination",
        json!({"p": p, "n": ns, "kappa": d.kappa, "test_points": d.test.len(), "trials": opts.sizes.domination_trials}),
        ok as f64 / d.test.len() as f64,
        1.0,
        "bound >= p_hat - 2 half-widths",
        ok == d.test.len(),
    ))
}

fn young_check<C: ChunkRunner>(p: f64, opts: &SuiteOptions, runner: &C) -> Result<Check> {
    let n = 10_000;
    let d = ex::young_domination(p, n, 6, opts.sizes.young_trials, opts.seed, runner)?;
    let ok = d.test.iter().filter(|(e, b)| *b >= e.p_hat - 2.0 * e.half_width()).count();
    Ok(Check::new(
        "young_domination",
        json!({"p": p, "n": n, "weights": "ones", "kappa": d.kappa, "test_points": d.test.len(),
            "mean_estimate": d.mean_estimate, "mean_stderr": d.mean_stderr}),
        ok as f64 / d.test.len() as f64,
        1.0,
        "bound >= p_hat - 2 half-widths",
        ok == d.test.len(),
    ))
}

fn limit_checks<C: ChunkRunner>(opts: &SuiteOptions, runner: &C) -> Result<Vec<Check>> {
    let l = ex::limits(&opts.sizes, opts.seed, runner)?;
    let vs: Vec<f64> = l.variances_p2.iter().map(|(_, v)| *v).collect();
    let (lo, hi) = vs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    Ok(vec![
        Check::new("ks_p3", json!({"p": 3.0, "n": 10_000, "trials": opts.sizes.ks_trials}), l.ks_p3, json!({"below": 0.05}), json!(null), l.ks_p3 < 0.05),
        Check::new(
            "hill_p1_5",
            json!({"p": 1.5, "n": 1_000, "trials": opts.sizes.hill_trials}),
            l.hill_p15,
            json!({"within": [1.2, 1.8]}),
            json!(null),
            (1.2..=1.8).contains(&l.hill_p15),
        ),
        Check::new(
            "variance_p2",
            json!({"p": 2.0, "n": [1_000, 10_000, 100_000], "trials": opts.sizes.variance_trials}),
            json!({"variances": vs, "max_over_min": hi / lo}),
            json!({"below": 2.0}),
            json!(null),
            hi / lo < 2.0,
        ),
    ])
}

fn block_checks<C: ChunkRunner>(opts: &SuiteOptions, runner: &C) -> Result<Vec<Check>> {
    let r = ex::blocks(2.0, 10_000, 300.0, opts.sizes.block_paths, opts.seed, runner)?;
    let inputs = json!({"p": 2.0, "n": 10_000, "x": 300.0, "paths": r.paths, "t": r.params.t, "n_t": r.params.n_t});
    let within = |name: &str, m: &polymix_core::tails::block::MeanSe| {
        Check::new(name, inputs.clone(), json!({"mean": m.mean, "stderr": m.stderr}), 0.0, "4 standard errors", m.within(4.0))
    };
    let mut out = vec![Check::new(
        "block_cap",
        inputs.clone(),
        json!({"max_abs_x": r.max_abs_x, "violations": r.cap_violations}),
        json!({"at_most": r.cap}),
        json!(null),
        r.cap_violations == 0 && r.max_abs_x <= r.cap,
    )];
    out.push(within("block_mean_x", &r.mean_x));
    out.push(within("block_residual", &r.residual));
    for (i, m) in r.residual_by_state.iter().enumerate() {
        out.push(within(&format!("block_residual_state_{i}"), m));
    }
    Ok(out)
}

pub const QUAD_B: [f64; 4] = [0.5, 1.0, 2.0, 3.5];

/// `B(b+1, k+1) ≤ k^{−(b+1)} Γ(b+1)`.
pub fn quadrature_checks() -> Vec<Check> {
    let mut out = Vec::with_capacity(400);
    for b in QUAD_B {
        for k in 1..=100u32 {
            let lhs = beta_int(b, k);
            let rhs = powf(k as f64, -(b + 1.0)) * gamma(b + 1.0);
            out.push(Check::new("beta_gamma", json!({"b": b, "k": k}), lhs, json!({"at_most": rhs}), json!(null), lhs <= rhs));
        }
    }
    out
}

fn doubling_checks() -> Result<Vec<Check>> {
    let ns: Vec<u64> = (1..=20).collect();
    let c = ex::doubling_coefficients(&ns)?;
    Ok(ns
        .iter()
        .zip(c)
        .map(|(&n, v)| Check::near("doubling_closed_form", json!({"n": n}), v, powf(2.0, -(n as f64 + 2.0)), 1e-12))
        .collect())
}

fn constant_checks() -> Result<Vec<Check>> {
    let f2 = fuk_constants(2.0, false)?;
    let f3 = fuk_constants(3.0, false)?;
    let r3 = fuk_constants(3.0, true)?;
    let young = young_bound(2.0, &[1.0; 100], 1.0, 1.0)?;
    let proxy = young.aux_value("variance_proxy").unwrap_or(f64::NAN);
    Ok(vec![
        Check::near("fuk_beta", json!({"p": 2.0}), f2.beta, 0.5, 1e-12),
        Check::near("fuk_c_star", json!({"p": 2.0}), f2.c_star, 1.0 / (8.0 * E * E), 1e-12),
        Check::near("fuk_beta", json!({"p": 3.0}), f3.beta, 0.6, 1e-12),
        Check::near("fuk_c_star", json!({"p": 3.0}), f3.c_star, 0.16 / (2.0 * E.powi(3)), 1e-12),
        Check::near("fuk_c_star_reverse", json!({"p": 3.0}), r3.c_star, 0.16 / (8.0 * E.powi(3)), 1e-12),
        Check::near("harris_lower_constant", json!({"p": 2.0, "gamma": 1.0}), harris_lower_constant(2.0, 1.0)?, 3.0518e-5, 1e-9),
        Check::near("young_log_factor", json!({"p": 2.0, "L": "ones:100"}), proxy, 330.259, 1e-3),
    ])
}
