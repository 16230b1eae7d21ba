//! Binomial intervals, least squares, and limit-law diagnostics.

use alloc::format;
use alloc::vec::Vec;

use crate::special::{ln, normal_cdf, sqrt};
use crate::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Wilson score interval at 95% for `hits` successes out of `trials`.
pub fn wilson(hits: u64, trials: u64) -> (f64, f64) {
    wilson_z(hits, trials, Z95)
}

pub fn wilson_z(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    let lo = if hits == 0 { 0.0 } else { (center - half).max(0.0).min(p) };
    let hi = if hits == trials { 1.0 } else { (center + half).min(1.0).max(p) };
    (lo, hi)
}

/// Slope, intercept and slope standard error of a least-squares line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub points_used: usize,
}

/// Ordinary least squares of `ys` on `xs`; also returns the residual sum of
/// squares.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<(ScalingFit, f64)> {
    let m = xs.len();
    if m != ys.len() {
        return Err(Error::Usage("x and y lengths differ".into()));
    }
    if m < 3 {
        return Err(Error::Degenerate(format!("a line fit needs at least 3 points, got {m}")));
    }
    let mf = m as f64;
    let mx = xs.iter().sum::<f64>() / mf;
    let my = ys.iter().sum::<f64>() / mf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("all abscissae are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| {
        let r = y - intercept - slope * x;
        r * r
    }).sum();
    let stderr = sqrt(rss / (mf - 2.0) / sxx);
    Ok((ScalingFit { slope, intercept, stderr, points_used: m }, rss))
}

/// Kolmogorov–Smirnov distance between the studentized sample and the
/// standard normal law.
pub fn ks_normal(samples: &[f64]) -> Result<f64> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::Degenerate("KS needs at least 2 samples".into()));
    }
    let mf = m as f64;
    let mean = samples.iter().sum::<f64>() / mf;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (mf - 1.0);
    if !(var > 0.0) {
        return Err(Error::Degenerate("samples are constant".into()));
    }
    let sd = sqrt(var);
    let mut z: Vec<f64> = samples.iter().map(|v| (v - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    Ok(z.iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = normal_cdf(v);
            (c - i as f64 / mf).abs().max(((i + 1) as f64 / mf - c).abs())
        })
        .fold(0.0, f64::max))
}

/// Hill estimate of the right tail index from the top `frac` share of the
/// sample (at least two order statistics).
pub fn hill_index(samples: &[f64], frac: f64) -> Result<f64> {
    let mut s: Vec<f64> = samples.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let k = ((frac * s.len() as f64) as usize).max(2);
    if k >= s.len() {
        return Err(Error::Degenerate("too few samples for the Hill estimator".into()));
    }
    let threshold = s[k];
    if !(threshold > 0.0) {
        return Err(Error::Degenerate("Hill threshold order statistic is not positive".into()));
    }
    let mean_log: f64 = s[..k].iter().map(|v| ln(v / threshold)).sum::<f64>() / k as f64;
    if !(mean_log > 0.0) {
        return Err(Error::Degenerate("top order statistics are all equal".into()));
    }
    Ok(1.0 / mean_log)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitKind {
    KsNormal,
    HillIndex,
}

/// Share of order statistics used by the Hill estimator.
pub const HILL_FRACTION: f64 = 0.05;

/// KS distance to the normal law, or Hill index on the top 5%.
pub fn limit_diagnostic(samples: &[f64], kind: LimitKind) -> Result<f64> {
    if samples.len() < 500 {
        return Err(Error::Usage(format!("limit diagnostics need at least 500 samples, got {}", samples.len())));
    }
    let first = samples[0];
    if samples.iter().all(|v| *v == first) {
        return Err(Error::Degenerate("samples are constant".into()));
    }
    match kind {
        LimitKind::KsNormal => ks_normal(samples),
        LimitKind::HillIndex => hill_index(samples, HILL_FRACTION),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{open01, RngStream};

    #[test]
    fn wilson_brackets_the_estimate() {
        for (h, n) in [(0u64, 100u64), (1, 100), (50, 100), (100, 100), (3, 200_000)] {
            let (lo, hi) = wilson(h, n);
            let p = h as f64 / n as f64;
            assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
        }
        // reference: 50/100 → (0.4038, 0.5962)
        let (lo, hi) = wilson(50, 100);
        assert!((lo - 0.40383153).abs() < 1e-6 && (hi - 0.59616847).abs() < 1e-6);
    }

    #[test]
    fn ols_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 3.0 * x).collect();
        let (f, rss) = ols(&xs, &ys).unwrap();
        assert!((f.slope + 3.0).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
        assert!(rss < 1e-25 && f.stderr < 1e-12);
        assert!(ols(&xs[..2], &ys[..2]).is_err());
        assert!(ols(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    fn normals(m: usize, seed: u64) -> Vec<f64> {
        let mut g = RngStream::new(seed, 0).generator();
        (0..m)
            .map(|_| {
                let (u, v) = (open01(&mut g), open01(&mut g));
                sqrt(-2.0 * ln(u)) * libm::cos(2.0 * core::f64::consts::PI * v)
            })
            .collect()
    }

    #[test]
    fn ks_calibration() {
        let d = limit_diagnostic(&normals(5000, 1), LimitKind::KsNormal).unwrap();
        assert!(d < 0.03, "{d}");
        let mut g = RngStream::new(2, 0).generator();
        let expo: Vec<f64> = (0..5000).map(|_| -ln(open01(&mut g))).collect();
        assert!(limit_diagnostic(&expo, LimitKind::KsNormal).unwrap() > 0.05);
    }

    #[test]
    fn hill_calibration() {
        let mut g = RngStream::new(3, 0).generator();
        let pareto: Vec<f64> = (0..10_000).map(|_| libm::pow(open01(&mut g), -1.0 / 1.5)).collect();
        let h = limit_diagnostic(&pareto, LimitKind::HillIndex).unwrap();
        assert!((h - 1.5).abs() < 0.2, "{h}");
    }

    #[test]
    fn diagnostics_reject_bad_input() {
        assert!(matches!(limit_diagnostic(&[1.0; 600], LimitKind::KsNormal), Err(Error::Degenerate(_))));
        assert!(limit_diagnostic(&[1.0, 2.0], LimitKind::HillIndex).is_err());
    }
}
