//! Command-line front end. Data goes to standard output or `--out`;
//! progress and diagnostics go to standard error.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use polymix_core::bounds::{
    block_parameters, default_c0, freedman_terms, fuk_bound, fuk_constants, harris_lower_constant, maximal_mk,
    moddev_bound, rio_fn_bound, rosenthal_bound, weak_fuk_bound, weak_fuk_cp_default, weak_fuk_cp_traced,
    young_bound, DeltaSum, ModDevCase,
};
use polymix_core::chains::{ChainModel, Observable};
use polymix_core::mixing::{exact_curve, h1_coefficient_mc, rate_fit, ExactOptions, McOptions, MixingCurve, HARRIS_BINS};
use polymix_core::rng::derive_seed;
use polymix_core::tails::{
    excursion_sum_tail_grid, kappa_fit, mc_tail, ChunkRunner, Statistic, TailEstimate, TailRun, CHUNK,
};

use crate::config::{ChainKind, ExperimentArgs, ExperimentConfig};
use crate::error::{invalid, io_err, CliError};
use crate::experiments::Sizes;
use crate::io::{self, TailContext};
use crate::runner::Threaded;
use crate::verify::{run_suite, Suite, SuiteOptions};

#[derive(Debug, Parser)]
#[command(name = "polymix", version, about = "Simulation and verification toolkit for polynomially mixing Markov chains")]
pub struct Cli {
    /// Worker threads (overrides POLYMIX_WORKERS; default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mixing coefficients π(|Kⁿf − πf|) and their decay rate.
    Mixing(MixingArgs),
    /// Monte-Carlo deviation probabilities with Wilson intervals.
    Tails(TailsArgs),
    /// Evaluate one inequality right-hand side.
    Bounds(BoundsArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Concatenate earlier outputs into one JSON-lines file.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MixingMethod {
    Exact,
    Mc,
}

#[derive(Debug, Args)]
pub struct MixingArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[arg(long, value_enum, default_value = "exact")]
    pub method: MixingMethod,
    /// Fit range; defaults to the whole n list.
    #[arg(long)]
    pub fit_min: Option<u64>,
    #[arg(long)]
    pub fit_max: Option<u64>,
    /// Continuations per stationary start (Monte-Carlo method).
    #[arg(long, default_value_t = 64)]
    pub inner: u64,
    /// Midpoint bins of the Harris discretization.
    #[arg(long, default_value_t = HARRIS_BINS)]
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatisticArg {
    MaxAbsPartialSum,
    AbsSum,
    ExcursionSum,
    Functional,
}

impl StatisticArg {
    fn statistic(self) -> Statistic {
        match self {
            StatisticArg::MaxAbsPartialSum => Statistic::MaxAbsPartialSum,
            StatisticArg::AbsSum => Statistic::AbsSum,
            StatisticArg::ExcursionSum => Statistic::ExcursionSum,
            StatisticArg::Functional => Statistic::Functional,
        }
    }
}

#[derive(Debug, Args)]
pub struct TailsArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[arg(long, value_enum, default_value = "max-abs-partial-sum")]
    pub statistic: StatisticArg,
    /// Functional weights: ones, young (w₀ = 1, wᵢ = n^{−1/2}) or const:C.
    #[arg(long)]
    pub weights: Option<String>,
    /// Skip the resolvability gate.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// One of the names listed by `bounds help`.
    pub op: String,
    /// Named inputs as `--name value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    pub inputs: Vec<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, value_enum)]
    pub chain: Option<ChainKind>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replace every Monte-Carlo size of the suite.
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long = "out")]
    pub output_path: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// CSV or JSON-lines files written by earlier commands.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long = "out")]
    pub output_path: Option<PathBuf>,
}

/// Runs a parsed command line.
pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let runner = Threaded::resolve(cli.workers).map_err(CliError::Validation)?;
    match cli.command {
        Command::Mixing(a) => cmd_mixing(&a, &runner, stdout, stderr),
        Command::Tails(a) => cmd_tails(&a, &runner, stdout, stderr),
        Command::Bounds(a) => cmd_bounds(&a, stdout),
        Command::Verify(a) => cmd_verify(&a, &runner, stdout, stderr),
        Command::Report(a) => cmd_report(&a, stdout),
    }
}

/// Writes to `--out` when given, otherwise to standard output.
fn with_output(
    path: &Option<PathBuf>,
    stdout: &mut dyn Write,
    f: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut w = io::create(p)?;
            f(&mut w)?;
            w.flush().map_err(|e| io_err(p.display(), e))
        }
        None => f(stdout),
    }
}

fn note(stderr: &mut dyn Write, msg: impl std::fmt::Display) {
    // telemetry only; a closed stderr must not fail the command
    let _ = writeln!(stderr, "{msg}");
}

pub fn cmd_mixing<C: ChunkRunner>(a: &MixingArgs, runner: &C, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let cfg = ExperimentConfig::resolve(&a.exp)?;
    let kind = cfg.require_chain()?;
    if kind != ChainKind::Doubling {
        cfg.require_p()?;
    }
    let ns = cfg.require_n_list()?.to_vec();
    let (chain, obs) = cfg.build_chain()?;
    let curve = match a.method {
        MixingMethod::Exact => exact_curve(&chain, &obs, &ns, ExactOptions { harris_bins: a.bins })?,
        MixingMethod::Mc => mc_curve(&chain, &obs, &ns, &cfg, a.inner, runner)?,
    };
    if curve.discretization_error > 0.0 {
        note(stderr, format_args!("discretization error bound {:.3e}", curve.discretization_error));
    }
    let n_min = a.fit_min.unwrap_or(ns[0]);
    let n_max = a.fit_max.unwrap_or(*ns.last().unwrap_or(&n_min));
    let fit = rate_fit(&curve, n_min, n_max);
    let fit_line = match &fit {
        Ok(f) => io::rate_fit_record(chain.name(), n_min, n_max, f),
        Err(e) => json!({"kind": "rate_fit", "chain": chain.name(), "n_min": n_min, "n_max": n_max, "error": e.to_string()}),
    };
    match &cfg.output_path {
        Some(p) => {
            let mut w = io::create(p)?;
            io::write_mixing_csv(&mut w, &curve)?;
            w.flush().map_err(|e| io_err(p.display(), e))?;
            io::write_json_line(stdout, &fit_line)?;
        }
        None => {
            io::write_mixing_csv(&mut *stdout, &curve)?;
            note(stderr, fit_line);
        }
    }
    Ok(())
}

fn mc_curve<C: ChunkRunner>(
    chain: &ChainModel,
    obs: &Observable,
    ns: &[u64],
    cfg: &ExperimentConfig,
    inner: u64,
    runner: &C,
) -> Result<MixingCurve, CliError> {
    let mut entries = Vec::with_capacity(ns.len());
    for (i, &n) in ns.iter().enumerate() {
        let opts = McOptions { starts: cfg.trials, inner, seed: derive_seed(cfg.seed, i as u64), chunk: CHUNK };
        entries.push(h1_coefficient_mc(chain, obs, n, opts, runner)?);
    }
    Ok(MixingCurve { entries, discretization_error: 0.0 })
}

/// Minimum expected hit count at the largest deviation level.
pub const MIN_EXPECTED_HITS: f64 = 20.0;

/// Pilot size of the resolvability gate.
fn pilot_trials(trials: u64) -> u64 {
    trials.min((trials / 10).max(1_000))
}

/// Predicted hits at the largest `x` from a pilot run: `κ` is fitted to
/// the polynomial shape `n x^{−p}` on the pilot points with at least 10
/// hits, or taken from the Wilson upper limit at the smallest `x` when no
/// point is resolved.
fn predicted_hits(pilot: &[TailEstimate], p: f64, trials: u64) -> f64 {
    let shape = |n: u64, x: f64| n as f64 * x.powf(-p);
    let resolved: Vec<TailEstimate> = pilot.iter().filter(|e| e.hits >= 10).copied().collect();
    let kappa = if resolved.is_empty() {
        pilot.first().map_or(0.0, |e| e.ci_high / shape(e.n, e.x))
    } else {
        kappa_fit(&resolved, shape).unwrap_or(0.0)
    };
    let last = pilot.last().expect("grids are nonempty");
    trials as f64 * (kappa * shape(last.n, last.x)).min(1.0)
}

fn parse_weights(spec: &str, n: u64) -> Result<Vec<f64>, CliError> {
    let n = n as usize;
    match spec.split_once(':') {
        None if spec == "ones" => Ok(vec![1.0; n]),
        None if spec == "young" => {
            let w = 1.0 / (n as f64).sqrt();
            Ok((0..n).map(|i| if i == 0 { 1.0 } else { w }).collect())
        }
        Some(("const", c)) => {
            let c: f64 = c.parse().map_err(|_| invalid(format!("invalid weight constant {c:?}")))?;
            Ok(vec![c; n])
        }
        _ => Err(invalid(format!("unknown weights {spec:?}; expected ones, young or const:C"))),
    }
}

pub fn cmd_tails<C: ChunkRunner>(a: &TailsArgs, runner: &C, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let cfg = ExperimentConfig::resolve(&a.exp)?;
    let kind = cfg.require_chain()?;
    let ns = cfg.require_n_list()?.to_vec();
    let grid_spec = cfg.x_grid.clone().ok_or_else(|| invalid("missing required field `x_grid`"))?;
    let (chain, obs) = cfg.build_chain()?;
    let statistic = a.statistic.statistic();
    // the doubling chain has no polynomial index; its gate uses n/x²
    let gate_p = if kind == ChainKind::Doubling { cfg.p.unwrap_or(2.0) } else { cfg.require_p()? };
    if statistic == Statistic::Functional && a.weights.is_none() {
        return Err(invalid("the functional statistic needs --weights"));
    }
    let mut grids = Vec::with_capacity(ns.len());
    for &n in &ns {
        let g = grid_spec.resolve(n, cfg.p)?;
        if g.is_empty() {
            return Err(invalid("the x grid is empty"));
        }
        grids.push(g);
    }
    let estimate = |n: u64, grid: &[f64], trials: u64, seed: u64| -> Result<Vec<TailEstimate>, CliError> {
        let run = TailRun::new(n, trials, seed);
        Ok(match statistic {
            Statistic::ExcursionSum => match &chain {
                ChainModel::Renewal(l) | ChainModel::Tower(l) => excursion_sum_tail_grid(l, grid, run, runner)?,
                ChainModel::Harris(h) => excursion_sum_tail_grid(h, grid, run, runner)?,
                _ => return Err(invalid("excursion sums need a renewal, tower or Harris chain")),
            },
            Statistic::Functional => {
                let w = parse_weights(a.weights.as_deref().unwrap_or_default(), n)?;
                mc_tail(&chain, &obs, grid, run, statistic, Some(&w), runner)?
            }
            _ => mc_tail(&chain, &obs, grid, run, statistic, None, runner)?,
        })
    };
    let mut rows = Vec::new();
    for (i, (&n, grid)) in ns.iter().zip(&grids).enumerate() {
        let seed = if ns.len() == 1 { cfg.seed } else { derive_seed(cfg.seed, i as u64) };
        if !a.force {
            let pilot_seed = derive_seed(seed, PILOT_LABEL);
            let pilot = estimate(n, grid, pilot_trials(cfg.trials), pilot_seed)?;
            let predicted = predicted_hits(&pilot, gate_p, cfg.trials);
            if predicted < MIN_EXPECTED_HITS {
                return Err(CliError::Unresolvable(format!(
                    "grid unresolvable at n = {n}: predicted {predicted:.2} hits at x = {} with {} trials, \
                     deficit {:.2} below the required {MIN_EXPECTED_HITS}; add trials, lower the grid, or pass --force",
                    grid[grid.len() - 1],
                    cfg.trials,
                    MIN_EXPECTED_HITS - predicted
                )));
            }
        }
        note(stderr, format_args!("tails: n = {n}, {} points, {} trials", grid.len(), cfg.trials));
        rows.extend(estimate(n, grid, cfg.trials, seed)?);
    }
    let gamma = match kind {
        ChainKind::Harris => Some(cfg.gamma.unwrap_or(1.0)),
        _ => cfg.gamma,
    };
    let ctx = TailContext { chain: kind.as_str(), p: cfg.p, gamma, seed: cfg.seed };
    with_output(&cfg.output_path, stdout, |w| io::write_tail_csv(w, ctx, &rows))
}

/// Label mixed into the seed of the gate's pilot run.
const PILOT_LABEL: u64 = 0x70_696c_6f74;

pub const BOUND_OPS: [&str; 11] = [
    "moddev",
    "rio",
    "fuk-constants",
    "fuk",
    "weak-fuk",
    "rosenthal",
    "young",
    "maximal-mk",
    "block-params",
    "freedman",
    "harris-lower-constant",
];

/// `--name value` pairs; a flag followed by another flag or nothing is
/// `true`.
struct Named {
    values: BTreeMap<String, String>,
}

impl Named {
    fn parse(args: &[String]) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        let mut i = 0;
        while i < args.len() {
            let key = args[i]
                .strip_prefix("--")
                .ok_or_else(|| invalid(format!("expected --name, got {:?}", args[i])))?
                .to_string();
            let next = args.get(i + 1);
            let is_value = next.is_some_and(|v| !v.starts_with("--"));
            let value = if is_value { next.cloned().unwrap_or_default() } else { "true".into() };
            i += if is_value { 2 } else { 1 };
            if values.insert(key.clone(), value).is_some() {
                return Err(invalid(format!("--{key} given twice")));
            }
        }
        Ok(Self { values })
    }

    fn num(&self, key: &str) -> Result<f64, CliError> {
        let v = self.values.get(key).ok_or_else(|| invalid(format!("missing required input --{key}")))?;
        v.parse().map_err(|_| invalid(format!("--{key} expects a number, got {v:?}")))
    }

    fn num_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        if self.values.contains_key(key) {
            self.num(key)
        } else {
            Ok(default)
        }
    }

    fn opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        if self.values.contains_key(key) {
            self.num(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.values.get(key).map(String::as_str) {
            None | Some("false") => Ok(false),
            Some("true") => Ok(true),
            Some(v) => Err(invalid(format!("--{key} expects true or false, got {v:?}"))),
        }
    }

    fn text(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let spec = self.text(key).ok_or_else(|| invalid(format!("missing required input --{key}")))?;
        parse_list(spec).map_err(|m| invalid(format!("--{key}: {m}")))
    }

    /// Rejects names the operation does not read.
    fn only(&self, allowed: &[&str]) -> Result<(), CliError> {
        for k in self.values.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(invalid(format!("unknown input --{k}; accepted: {}", allowed.join(", "))));
            }
        }
        Ok(())
    }
}

/// `ones:N`, `const:V:N` or a comma list.
fn parse_list(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let count = |s: &str| s.parse::<usize>().map_err(|_| format!("invalid length {s:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("invalid number {s:?}"));
    match parts.as_slice() {
        ["ones", n] => Ok(vec![1.0; count(n)?]),
        ["const", v, n] => Ok(vec![num(v)?; count(n)?]),
        [list] => list.split(',').map(num).collect(),
        _ => Err(format!("expected ones:N, const:V:N or a comma list, got {spec:?}")),
    }
}

pub fn cmd_bounds(a: &BoundsArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let named = Named::parse(&a.inputs)?;
    let line = evaluate_bound(&a.op, &named)?;
    io::write_json_line(stdout, &line)
}

fn evaluate_bound(op: &str, m: &Named) -> Result<Value, CliError> {
    let b = match op {
        "moddev" => {
            m.only(&["case", "n", "x", "p", "r", "kappa"])?;
            let p = m.num("p")?;
            let case = match m.text("case") {
                None => ModDevCase::for_p(p),
                Some("p_gt_2") => ModDevCase::PGt2,
                Some("p_eq_2") => ModDevCase::PEq2,
                Some("p_lt_2") => ModDevCase::PLt2,
                Some(c) => return Err(invalid(format!("unknown case {c:?}; expected p_gt_2, p_eq_2 or p_lt_2"))),
            };
            moddev_bound(case, m.num("n")?, m.num("x")?, p, m.opt("r")?, m.num_or("kappa", 1.0)?)?
        }
        "rio" => {
            m.only(&["n", "x", "p", "r", "C"])?;
            rio_fn_bound(m.num("n")?, m.num("x")?, m.num("p")?, m.num("r")?, m.num_or("C", 1.0)?)?
        }
        "fuk-constants" => {
            m.only(&["p", "reverse"])?;
            let k = fuk_constants(m.num("p")?, m.flag("reverse")?)?;
            return Ok(json!({
                "op": "fuk_constants",
                "inputs": {"p": k.p, "reverse": k.reverse},
                "beta": k.beta,
                "c_star": k.c_star,
            }));
        }
        "fuk" => {
            m.only(&["p", "x", "sum-tail-probs", "sum-weak-caps", "sum-var-caps", "reverse"])?;
            fuk_bound(
                m.num("p")?,
                m.num("x")?,
                m.num("sum-tail-probs")?,
                m.num("sum-weak-caps")?,
                m.num("sum-var-caps")?,
                m.flag("reverse")?,
            )?
        }
        "weak-fuk" => {
            m.only(&["p", "x", "M", "var-cap-sum", "Cp"])?;
            let p = m.num("p")?;
            let c_p = match m.text("Cp") {
                None | Some("default") => weak_fuk_cp_default(p)?,
                Some("traced") => weak_fuk_cp_traced(p)?,
                Some(_) => m.num("Cp")?,
            };
            weak_fuk_bound(p, m.num("x")?, &m.list("M")?, m.num("var-cap-sum")?, c_p)?
        }
        "rosenthal" => {
            m.only(&["r", "N", "x", "l1-coupling", "r-moment", "second-moment", "delta-sum", "delta-raw", "multiplier"])?;
            let d = m.num_or("delta-sum", 0.0)?;
            let delta = if m.flag("delta-raw")? { DeltaSum::Raw(d) } else { DeltaSum::Raised(d) };
            rosenthal_bound(
                m.num("r")?,
                m.num("N")?,
                m.num("x")?,
                m.num("l1-coupling")?,
                m.num("r-moment")?,
                m.num("second-moment")?,
                delta,
                m.num_or("multiplier", 1.0)?,
            )?
        }
        "young" => {
            m.only(&["p", "x", "L", "kappa"])?;
            young_bound(m.num("p")?, &m.list("L")?, m.num("x")?, m.num_or("kappa", 1.0)?)?
        }
        "maximal-mk" => {
            m.only(&["L", "c0", "C", "k", "p"])?;
            let l = m.list("L")?;
            let c0 = if m.text("c0").is_some() { m.list("c0")? } else { default_c0(l.len()) };
            let k = m.num("k")?;
            if k < 0.0 || k.fract() != 0.0 {
                return Err(invalid("--k must be a nonnegative integer"));
            }
            let (c, p) = (m.num_or("C", 1.0)?, m.num("p")?);
            let v = maximal_mk(&l, &c0, c, k as usize, p)?;
            return Ok(json!({"op": "maximal_mk", "inputs": {"n": l.len(), "C": c, "k": k, "p": p}, "value": v}));
        }
        "block-params" => {
            m.only(&["n", "x", "p", "f-inf", "kappa"])?;
            let n = m.num("n")?;
            if !(n >= 1.0) || n.fract() != 0.0 {
                return Err(invalid("--n must be a positive integer"));
            }
            let b = block_parameters(n as u64, m.num("x")?, m.num("p")?, m.num("f-inf")?, m.num_or("kappa", 1.0)?)?;
            return Ok(io::block_params_record(&b));
        }
        "freedman" => {
            m.only(&["x", "y", "f-inf", "n", "p"])?;
            freedman_terms(m.num("x")?, m.num("y")?, m.num("f-inf")?, m.num("n")?, m.num("p")?)?
        }
        "harris-lower-constant" => {
            m.only(&["p", "gamma"])?;
            let (p, g) = (m.num("p")?, m.num("gamma")?);
            let v = harris_lower_constant(p, g)?;
            return Ok(json!({"op": "harris_lower_constant", "inputs": {"p": p, "gamma": g}, "value": v}));
        }
        _ => return Err(invalid(format!("unknown bound {op:?}; valid names: {}", BOUND_OPS.join(", ")))),
    };
    Ok(io::breakdown_record(&b))
}

pub fn cmd_verify<C: ChunkRunner>(a: &VerifyArgs, runner: &C, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    if let Some(t) = a.trials {
        if t < 100 {
            return Err(invalid(format!("field `trials` must be at least 100, got {t}")));
        }
    }
    let opts = SuiteOptions {
        chain: a.chain,
        p: a.p,
        gamma: a.gamma,
        seed: a.seed,
        sizes: a.trials.map_or_else(Sizes::default, Sizes::uniform),
    };
    note(stderr, format_args!("verify: suite {}", a.suite.as_str()));
    let checks = run_suite(a.suite, &opts, runner)?;
    with_output(&a.output_path, stdout, |w| {
        for c in &checks {
            let v = serde_json::to_value(c).map_err(|e| io_err("encoding check", e))?;
            io::write_json_line(w, &v)?;
        }
        Ok(())
    })?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.check.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!("{} of {} checks failed: {}", failed.len(), checks.len(), failed.join(", "))))
    }
}

pub fn cmd_report(a: &ReportArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut records = Vec::new();
    for p in &a.inputs {
        records.extend(io::report_records(p)?);
    }
    with_output(&a.output_path, stdout, |w| records.iter().try_for_each(|r| io::write_json_line(w, r)))
}
