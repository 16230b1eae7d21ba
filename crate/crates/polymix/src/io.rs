//! File formats: CSV for tail estimates and mixing curves, JSON-lines for
//! everything else. Column and field names are frozen.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use polymix_core::bounds::{BlockParams, BoundBreakdown};
use polymix_core::mixing::{MixingCurve, RateFit};
use polymix_core::tails::block::{BlockReport, MeanSe};
use polymix_core::tails::{ScalingFit, ScalingReport, TailEstimate};

use crate::error::{io_err, CliError};

pub const TAIL_COLUMNS: [&str; 12] =
    ["statistic", "chain", "p", "gamma", "n", "x", "hits", "trials", "p_hat", "ci_low", "ci_high", "seed"];

pub const MIXING_COLUMNS: [&str; 4] = ["n", "coeff", "stderr", "method"];

/// Run-level columns shared by every row of a tail CSV.
#[derive(Debug, Clone, Copy)]
pub struct TailContext<'a> {
    pub chain: &'a str,
    pub p: Option<f64>,
    pub gamma: Option<f64>,
    pub seed: u64,
}

#[derive(Serialize)]
struct TailRow<'a> {
    statistic: &'a str,
    chain: &'a str,
    p: Option<f64>,
    gamma: Option<f64>,
    n: u64,
    x: f64,
    hits: u64,
    trials: u64,
    p_hat: f64,
    ci_low: f64,
    ci_high: f64,
    seed: u64,
}

#[derive(Serialize)]
struct MixingRow<'a> {
    n: u64,
    coeff: f64,
    stderr: f64,
    method: &'a str,
}

pub fn write_tail_csv<W: Write>(out: W, ctx: TailContext<'_>, estimates: &[TailEstimate]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let err = |e: csv::Error| io_err("writing tail CSV", e);
    w.write_record(TAIL_COLUMNS).map_err(err)?;
    for e in estimates {
        w.serialize(TailRow {
            statistic: e.statistic.as_str(),
            chain: ctx.chain,
            p: ctx.p,
            gamma: ctx.gamma,
            n: e.n,
            x: e.x,
            hits: e.hits,
            trials: e.trials,
            p_hat: e.p_hat,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            seed: ctx.seed,
        })
        .map_err(err)?;
    }
    w.flush().map_err(|e| io_err("writing tail CSV", e))
}

pub fn write_mixing_csv<W: Write>(out: W, curve: &MixingCurve) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let err = |e: csv::Error| io_err("writing mixing CSV", e);
    w.write_record(MIXING_COLUMNS).map_err(err)?;
    for e in &curve.entries {
        w.serialize(MixingRow { n: e.n, coeff: e.coeff, stderr: e.stderr, method: e.method.as_str() })
            .map_err(err)?;
    }
    w.flush().map_err(|e| io_err("writing mixing CSV", e))
}

pub fn write_json_line<W: Write + ?Sized>(out: &mut W, v: &Value) -> Result<(), CliError> {
    serde_json::to_writer(&mut *out, v).map_err(|e| io_err("writing JSON", e))?;
    out.write_all(b"\n").map_err(|e| io_err("writing JSON", e))
}

fn pairs(items: &[(&str, f64)]) -> Value {
    Value::Object(items.iter().map(|(k, v)| (k.to_string(), json!(v))).collect())
}

pub fn breakdown_record(b: &BoundBreakdown) -> Value {
    json!({
        "op": b.op,
        "inputs": pairs(&b.inputs),
        "terms": b.terms.iter().map(|t| json!({"label": t.label, "value": t.value})).collect::<Vec<_>>(),
        "total": b.total,
        "regime": b.regime,
        "aux": pairs(&b.aux),
        "flags": b.flags,
    })
}

pub fn fit_record(fit: &ScalingFit) -> Value {
    json!({
        "slope": fit.slope,
        "intercept": fit.intercept,
        "stderr": fit.stderr,
        "points_used": fit.points_used,
    })
}

pub fn rate_fit_record(chain: &str, n_min: u64, n_max: u64, r: &RateFit) -> Value {
    let mut flags = r.flags.clone();
    if r.faster_than_polynomial && !flags.iter().any(|f| f == "faster than polynomial") {
        flags.push("faster than polynomial".into());
    }
    json!({
        "kind": "rate_fit",
        "chain": chain,
        "n_min": n_min,
        "n_max": n_max,
        "fit": fit_record(&r.fit),
        "excluded": r.excluded,
        "faster_than_polynomial": r.faster_than_polynomial,
        "flags": flags,
    })
}

pub fn scaling_record(mode: &str, r: &ScalingReport) -> Value {
    json!({
        "kind": "scaling_fit",
        "mode": mode,
        "fit": fit_record(&r.fit),
        "excluded": r.excluded,
        "flags": r.flags,
    })
}

pub fn block_params_record(b: &BlockParams) -> Value {
    json!({
        "op": "block_params",
        "inputs": {"n": b.n, "x": b.x, "p": b.p, "f_inf": b.f_inf, "kappa": b.kappa},
        "t": b.t,
        "u": b.u,
        "n_t": b.n_t,
        "n_u": b.n_u,
        "y_p_gt_2": b.y_p_gt_2,
        "y_p_eq_2": b.y_p_eq_2,
        "trivial_low": b.trivial_low,
        "trivial_high": b.trivial_high,
        "regime": b.regime(),
    })
}

fn mean_se(m: &MeanSe) -> Value {
    json!({"mean": m.mean, "stderr": m.stderr})
}

pub fn block_report_record(r: &BlockReport) -> Value {
    json!({
        "kind": "block_check",
        "params": block_params_record(&r.params),
        "paths": r.paths,
        "f_inf": r.f_inf,
        "cap": r.cap,
        "max_abs_x": r.max_abs_x,
        "cap_violations": r.cap_violations,
        "mean_x": mean_se(&r.mean_x),
        "residual": mean_se(&r.residual),
        "residual_by_state": r.residual_by_state.iter().map(mean_se).collect::<Vec<_>>(),
        "warnings": r.warnings,
    })
}

/// Opens `path` for writing, mapping failures to exit code 3.
pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path.display(), e))
}

/// Turns a CSV or JSON-lines file into JSON records tagged with their source.
pub fn report_records(path: &Path) -> Result<Vec<Value>, CliError> {
    let source = path.display().to_string();
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let mut out = Vec::new();
    if is_csv {
        let mut r = csv::Reader::from_path(path).map_err(|e| io_err(&source, e))?;
        let headers = r.headers().map_err(|e| io_err(&source, e))?.clone();
        for rec in r.records() {
            let rec = rec.map_err(|e| io_err(&source, e))?;
            let row: Map<String, Value> =
                headers.iter().zip(rec.iter()).map(|(h, v)| (h.to_string(), csv_cell(v))).collect();
            out.push(json!({"source": source, "record": row}));
        }
    } else {
        let f = File::open(path).map_err(|e| io_err(&source, e))?;
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| io_err(&source, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Value = serde_json::from_str(&line)
                .map_err(|e| CliError::Validation(format!("{source}:{}: not a JSON line: {e}", i + 1)))?;
            out.push(json!({"source": source, "record": v}));
        }
    }
    Ok(out)
}

/// Numbers stay numbers; everything else stays text.
fn csv_cell(v: &str) -> Value {
    if v.is_empty() {
        return Value::Null;
    }
    if let Ok(i) = v.parse::<u64>() {
        return json!(i);
    }
    match v.parse::<f64>() {
        Ok(f) if f.is_finite() => json!(f),
        _ => json!(v),
    }
}
