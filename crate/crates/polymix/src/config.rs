//! Experiment configuration from a JSON file and command-line flags.
//! Flags override file values; every field is validated before sampling.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use polymix_core::chains::{ChainModel, HarrisParams, Observable, RenewalLaw, DEFAULT_TRUNCATION};
use polymix_core::tails::{bandwidth_grid, linear_grid, log_grid};

use crate::error::{invalid, io_err, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainKind {
    Renewal,
    Harris,
    Doubling,
    Tower,
}

impl ChainKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChainKind::Renewal => "renewal",
            ChainKind::Harris => "harris",
            ChainKind::Doubling => "doubling",
            ChainKind::Tower => "tower",
        }
    }
}

/// How the deviation levels of a tail run are laid out.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Linear { lo: f64, hi: f64, count: usize },
    Log { lo: f64, hi: f64, count: usize },
    /// `count` log-spaced points in `[4n^{1/p}, n/16]`.
    Bandwidth { count: usize },
    List(Vec<f64>),
}

impl GridSpec {
    /// `bandwidth:k`, `log:lo:hi:k`, `linear:lo:hi:k`, or a comma list.
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let bad = || invalid(format!("invalid x grid {s:?}; expected bandwidth:K, log:LO:HI:K, linear:LO:HI:K or a comma list"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let count = |t: &str| t.trim().parse::<usize>().ok().filter(|c| *c > 0).ok_or_else(bad);
        match parts.as_slice() {
            ["bandwidth", k] => Ok(GridSpec::Bandwidth { count: count(k)? }),
            ["log", lo, hi, k] => Ok(GridSpec::Log { lo: num(lo)?, hi: num(hi)?, count: count(k)? }),
            ["linear", lo, hi, k] => Ok(GridSpec::Linear { lo: num(lo)?, hi: num(hi)?, count: count(k)? }),
            [list] => {
                let xs = list.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
                Ok(GridSpec::List(xs))
            }
            _ => Err(bad()),
        }
    }

    pub fn resolve(&self, n: u64, p: Option<f64>) -> Result<Vec<f64>, CliError> {
        let mut xs = match self {
            GridSpec::Linear { lo, hi, count } => linear_grid(*lo, *hi, *count)?,
            GridSpec::Log { lo, hi, count } => log_grid(*lo, *hi, *count)?,
            GridSpec::Bandwidth { count } => {
                let p = p.ok_or_else(|| invalid("missing required field `p` (bandwidth grids need p)"))?;
                bandwidth_grid(n, p, *count)?
            }
            GridSpec::List(xs) => xs.clone(),
        };
        if xs.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(invalid("x grid values must be finite and nonnegative"));
        }
        if xs.windows(2).any(|w| w[0] > w[1]) {
            xs.sort_by(f64::total_cmp);
        }
        Ok(xs)
    }
}

/// `a..b` (every integer), `a..b:k` (k log-spaced integers), or a comma list.
pub fn parse_n_list(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || invalid(format!("invalid n list {s:?}; expected A..B, A..B:K or a comma list"));
    let int = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
    let s = s.trim();
    let out = if let Some((range, k)) = s.split_once(':') {
        let (a, b) = range.split_once("..").ok_or_else(bad)?;
        let (a, b, k) = (int(a)?, int(b)?, int(k)?);
        if a == 0 || b < a || k == 0 {
            return Err(bad());
        }
        let mut v: Vec<u64> = log_grid(a as f64, b as f64, k as usize)?.into_iter().map(|x| x.round() as u64).collect();
        v.dedup();
        v
    } else if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (int(a)?, int(b)?);
        if b < a {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',').map(int).collect::<Result<Vec<_>, _>>()?
    };
    if out.is_empty() || out.contains(&0) {
        return Err(invalid("n values must be positive"));
    }
    Ok(out)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum NListFile {
    List(Vec<u64>),
    Spec(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum GridFile {
    Spec(String),
    Object { kind: String, lo: Option<f64>, hi: Option<f64>, count: usize },
}

/// The structured-text form of a configuration.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    chain: Option<ChainKind>,
    p: Option<f64>,
    gamma: Option<f64>,
    n_list: Option<NListFile>,
    x_grid: Option<GridFile>,
    trials: Option<u64>,
    seed: Option<u64>,
    #[serde(rename = "truncation_N")]
    truncation_n: Option<usize>,
    output_path: Option<PathBuf>,
}

/// Flags shared by the experiment commands.
#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub chain: Option<ChainKind>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Path lengths: A..B, A..B:K or a comma list.
    #[arg(long = "n")]
    pub n_list: Option<String>,
    /// Deviation levels: bandwidth:K, log:LO:HI:K, linear:LO:HI:K or a comma list.
    #[arg(long = "x-grid")]
    pub x_grid: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest renewal jump kept.
    #[arg(long = "truncation")]
    pub truncation_n: Option<usize>,
    #[arg(long = "out")]
    pub output_path: Option<PathBuf>,
}

pub const DEFAULT_TRIALS: u64 = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub chain: Option<ChainKind>,
    pub p: Option<f64>,
    pub gamma: Option<f64>,
    pub n_list: Vec<u64>,
    pub x_grid: Option<GridSpec>,
    pub trials: u64,
    pub seed: u64,
    pub truncation_n: usize,
    pub output_path: Option<PathBuf>,
}

fn read_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path.display(), e))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

impl ExperimentConfig {
    pub fn resolve(args: &ExperimentArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let n_list = match (&args.n_list, &file.n_list) {
            (Some(s), _) => parse_n_list(s)?,
            (None, Some(NListFile::Spec(s))) => parse_n_list(s)?,
            (None, Some(NListFile::List(v))) => {
                if v.is_empty() || v.contains(&0) {
                    return Err(invalid("n values must be positive"));
                }
                v.clone()
            }
            (None, None) => Vec::new(),
        };
        let x_grid = match (&args.x_grid, &file.x_grid) {
            (Some(s), _) => Some(GridSpec::parse(s)?),
            (None, Some(GridFile::Spec(s))) => Some(GridSpec::parse(s)?),
            (None, Some(GridFile::Object { kind, lo, hi, count })) => Some(match (kind.as_str(), lo, hi) {
                ("bandwidth", _, _) => GridSpec::Bandwidth { count: *count },
                ("log", Some(lo), Some(hi)) => GridSpec::Log { lo: *lo, hi: *hi, count: *count },
                ("linear", Some(lo), Some(hi)) => GridSpec::Linear { lo: *lo, hi: *hi, count: *count },
                _ => return Err(invalid(format!("x_grid of kind {kind:?} needs lo and hi"))),
            }),
            (None, None) => None,
        };
        let cfg = Self {
            chain: args.chain.or(file.chain),
            p: args.p.or(file.p),
            gamma: args.gamma.or(file.gamma),
            n_list,
            x_grid,
            trials: args.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS),
            seed: args.seed.or(file.seed).unwrap_or(0),
            truncation_n: args.truncation_n.or(file.truncation_n).unwrap_or(DEFAULT_TRUNCATION),
            output_path: args.output_path.clone().or(file.output_path),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if let Some(p) = self.p {
            if !(p > 1.0) || !p.is_finite() {
                return Err(invalid(format!("field `p` must exceed 1, got {p}")));
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) || !g.is_finite() {
                return Err(invalid(format!("field `gamma` must be positive, got {g}")));
            }
        }
        if self.trials < 100 {
            return Err(invalid(format!("field `trials` must be at least 100, got {}", self.trials)));
        }
        if self.truncation_n < 2 {
            return Err(invalid("field `truncation_N` must be at least 2"));
        }
        Ok(())
    }

    pub fn require_chain(&self) -> Result<ChainKind, CliError> {
        self.chain.ok_or_else(|| invalid("missing required field `chain`"))
    }

    pub fn require_p(&self) -> Result<f64, CliError> {
        self.p.ok_or_else(|| invalid("missing required field `p`"))
    }

    pub fn require_n_list(&self) -> Result<&[u64], CliError> {
        if self.n_list.is_empty() {
            Err(invalid("missing required field `n`"))
        } else {
            Ok(&self.n_list)
        }
    }

    /// The chain and its default observable. Harris uses `gamma = 1` when
    /// none is given.
    pub fn build_chain(&self) -> Result<(ChainModel, Observable), CliError> {
        let chain = match self.require_chain()? {
            ChainKind::Renewal => ChainModel::Renewal(RenewalLaw::new(self.require_p()?, self.truncation_n)?),
            ChainKind::Tower => {
                let p = self.require_p()?;
                if !(p > 2.0) {
                    return Err(invalid(format!("the tower experiment is only run for p > 2, got {p}")));
                }
                ChainModel::Tower(RenewalLaw::new(p, self.truncation_n)?)
            }
            ChainKind::Harris => ChainModel::Harris(HarrisParams::new(self.require_p()?, self.gamma.unwrap_or(1.0))?),
            ChainKind::Doubling => ChainModel::Doubling,
        };
        let obs = chain.default_observable()?;
        Ok((chain, obs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_specs() {
        assert_eq!(GridSpec::parse("bandwidth:12").unwrap(), GridSpec::Bandwidth { count: 12 });
        assert_eq!(GridSpec::parse("log:1:100:3").unwrap(), GridSpec::Log { lo: 1.0, hi: 100.0, count: 3 });
        assert_eq!(GridSpec::parse("1,2.5").unwrap(), GridSpec::List(vec![1.0, 2.5]));
        assert!(GridSpec::parse("bandwidth:0").is_err());
        assert!(GridSpec::parse("cubic:1:2:3").is_err());
        let g = GridSpec::Bandwidth { count: 12 }.resolve(10_000, Some(3.0)).unwrap();
        assert_eq!(g.len(), 12);
        assert!((g[0] - 4.0 * 10_000f64.powf(1.0 / 3.0)).abs() < 1e-9);
        assert!((g[11] - 625.0).abs() < 1e-9);
        assert!(GridSpec::Bandwidth { count: 3 }.resolve(10_000, None).is_err());
    }

    #[test]
    fn n_lists() {
        assert_eq!(parse_n_list("10..13").unwrap(), vec![10, 11, 12, 13]);
        assert_eq!(parse_n_list("1000,3000").unwrap(), vec![1000, 3000]);
        let v = parse_n_list("10..1000:3").unwrap();
        assert_eq!(v, vec![10, 100, 1000]);
        assert!(parse_n_list("0..3").is_err());
        assert!(parse_n_list("5..3").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"chain":"renewal","p":3,"n_list":[100,200],"trials":500,"seed":9,"truncation_N":1000}"#).unwrap();
        let args = ExperimentArgs { config: Some(path), seed: Some(11), ..Default::default() };
        let c = ExperimentConfig::resolve(&args).unwrap();
        assert_eq!(c.chain, Some(ChainKind::Renewal));
        assert_eq!(c.n_list, vec![100, 200]);
        assert_eq!(c.trials, 500);
        assert_eq!(c.seed, 11);
        assert_eq!(c.truncation_n, 1000);
    }

    #[test]
    fn validation_names_the_field() {
        let args = ExperimentArgs { trials: Some(10), ..Default::default() };
        let e = ExperimentConfig::resolve(&args).unwrap_err();
        assert!(e.to_string().contains("trials"));
        let c = ExperimentConfig::resolve(&ExperimentArgs { chain: Some(ChainKind::Renewal), ..Default::default() }).unwrap();
        assert!(c.build_chain().unwrap_err().to_string().contains("`p`"));
    }
}
