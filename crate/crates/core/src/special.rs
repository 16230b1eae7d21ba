//! Elementary and special functions used throughout the crate.
//!
//! Everything goes through `libm` so the crate builds without `std`.

use crate::error::domain;
use crate::Result;

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Standard normal distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

/// `Σ_{n ≥ m} n^{-s}` for `s > 1` and `m ≥ 1`.
///
/// Terms below `max(m, 16)` are summed directly; the remainder uses the
/// Euler–Maclaurin expansion of the tail, whose error at a cut-off of 16 is
/// already far below double precision for `s ≤ 10`.
pub fn power_tail_sum(s: f64, m: u64) -> f64 {
    debug_assert!(s > 1.0 && m >= 1);
    let cut = m.max(16);
    let mut head = 0.0;
    // smallest terms first
    for k in (m..cut).rev() {
        head += powf(k as f64, -s);
    }
    head + euler_maclaurin_tail(s, cut as f64)
}

/// Euler–Maclaurin approximation of `Σ_{n ≥ m} n^{-s}` (integral term, half
/// endpoint, and three Bernoulli corrections).
fn euler_maclaurin_tail(s: f64, m: f64) -> f64 {
    let m_s = powf(m, -s);
    let integral = m * m_s / (s - 1.0);
    let b2 = s * m_s / m / 12.0;
    let b4 = s * (s + 1.0) * (s + 2.0) * m_s / (m * m * m) / 720.0;
    let b6 = s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * m_s / powf(m, 5.0) / 30240.0;
    integral + 0.5 * m_s + b2 - b4 + b6
}

/// Riemann zeta function for real `s > 1`, accurate to `tol`.
///
/// A direct partial sum up to `M` plus the Euler–Maclaurin tail at `M`. `M`
/// grows until the first omitted correction term drops below `tol`.
pub fn zeta(s: f64, tol: f64) -> Result<f64> {
    if !(s > 1.0) || !s.is_finite() {
        return Err(domain!("zeta requires s > 1, got {s}"));
    }
    if !(tol > 0.0) {
        return Err(domain!("zeta requires tol > 0, got {tol}"));
    }
    let mut m: u64 = 16;
    loop {
        let mf = m as f64;
        // size of the next Bernoulli correction (B8 term)
        let next = s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * (s + 5.0) * (s + 6.0)
            * powf(mf, -s - 7.0)
            / 1_209_600.0;
        if next < tol || m >= 1 << 20 {
            break;
        }
        m *= 2;
    }
    let mut head = 0.0;
    for k in (1..m).rev() {
        head += powf(k as f64, -s);
    }
    Ok(head + euler_maclaurin_tail(s, m as f64))
}

/// `B(b + 1, k + 1) = ∫₀¹ (1 − x)^k x^b dx` for integer `k ≥ 0` and `b > −1`,
/// evaluated as `k! / ((b+1)(b+2)…(b+k+1))`.
pub fn beta_int(b: f64, k: u32) -> f64 {
    let mut v = 1.0 / (b + 1.0);
    for j in 1..=k {
        v *= j as f64 / (b + 1.0 + j as f64);
    }
    v
}

/// Euler beta function `B(x, y)` for positive arguments.
pub fn beta(x: f64, y: f64) -> f64 {
    exp(ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn zeta_matches_closed_forms() {
        let z2 = zeta(2.0, 1e-10).unwrap();
        assert!((z2 - PI * PI / 6.0).abs() < 1e-10, "{z2}");
        let z4 = zeta(4.0, 1e-10).unwrap();
        assert!((z4 - PI.powi(4) / 90.0).abs() < 1e-10, "{z4}");
        let z6 = zeta(6.0, 1e-12).unwrap();
        assert!((z6 - PI.powi(6) / 945.0).abs() < 1e-12);
    }

    #[test]
    fn zeta_rejects_s_at_most_one() {
        assert!(matches!(zeta(1.0, 1e-8), Err(crate::Error::Domain(_))));
        assert!(zeta(0.5, 1e-8).is_err());
        assert!(zeta(2.0, 0.0).is_err());
    }

    #[test]
    fn zeta_near_one_is_large_and_finite() {
        // ζ(1 + ε) ≈ 1/ε + γ
        let z = zeta(1.001, 1e-10).unwrap();
        assert!((z - (1000.0 + 0.5772156649)).abs() < 1e-3, "{z}");
    }

    #[test]
    fn power_tail_agrees_with_brute_force() {
        for &s in &[1.5, 2.0, 3.0, 4.5] {
            for &m in &[1u64, 5, 40, 1000] {
                let brute: f64 = (m..m + 2_000_000).rev().map(|k| (k as f64).powf(-s)).sum::<f64>()
                    + ((m + 2_000_000) as f64).powf(1.0 - s) / (s - 1.0)
                    + 0.5 * ((m + 2_000_000) as f64).powf(-s);
                let tail = power_tail_sum(s, m);
                assert!(((tail - brute) / tail).abs() < 1e-9, "s={s} m={m}: {tail} vs {brute}");
            }
        }
    }

    #[test]
    fn beta_int_matches_simpson_quadrature() {
        for &b in &[0.5, 1.0, 2.0, 3.5] {
            for &k in &[1u32, 3, 10, 50] {
                let steps = 200_000;
                let h = 1.0 / steps as f64;
                let g = |x: f64| (1.0 - x).powi(k as i32) * x.powf(b);
                let mut acc = g(0.0) + g(1.0);
                for i in 1..steps {
                    let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                    acc += w * g(i as f64 * h);
                }
                let quad = acc * h / 3.0;
                let exact = beta_int(b, k);
                assert!(((quad - exact) / exact).abs() < 1e-6, "b={b} k={k}");
                assert!(((beta(b + 1.0, k as f64 + 1.0) - exact) / exact).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-1.0) - 0.15865525393145707).abs() < 1e-12);
    }
}
