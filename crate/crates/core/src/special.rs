//! Gamma-type special functions and the constants of the power-variation CLT.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Result};

const LANCZOS_G: f64 = 7.0;
// Lanczos coefficients for g = 7, n = 9.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(z: f64) -> f64 {
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (z + i as f64);
    }
    a
}

/// Γ(x) for x > 0.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return domain(format!("gamma_fn requires finite x > 0, got {x}"));
    }
    let g = gamma_unchecked(x);
    if !g.is_finite() {
        return domain(format!("gamma_fn({x}) overflows f64"));
    }
    Ok(g)
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_unchecked(1.0 - x));
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    // t^(z+1/2) is split in two so that Γ(170) does not overflow on the way.
    let half = t.powf(0.5 * (z + 0.5));
    (2.0 * PI).sqrt() * half * (half * (-t).exp()) * lanczos_sum(z)
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return domain(format!("ln_gamma requires finite x > 0, got {x}"));
    }
    Ok(ln_gamma_unchecked(x))
}

fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma_unchecked(1.0 - x);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln()
}

/// B(x, y) = Γ(x)Γ(y)/Γ(x+y).
pub fn beta_fn(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
        return domain(format!("beta_fn requires positive arguments, got ({x}, {y})"));
    }
    if x + y < 170.0 {
        Ok(gamma_unchecked(x) * gamma_unchecked(y) / gamma_unchecked(x + y))
    } else {
        Ok((ln_gamma_unchecked(x) + ln_gamma_unchecked(y) - ln_gamma_unchecked(x + y)).exp())
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p.is_finite() && p > 1.0) {
        return domain(format!("power p must satisfy p > 1, got {p}"));
    }
    Ok(())
}

/// c_p = 2^{p/2} Γ((p+1)/2) / Γ(1/2) = E|Z|^p.
pub fn c_p(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(2f64.powf(0.5 * p) * gamma_fn(0.5 * (p + 1.0))? / PI.sqrt())
}

/// μ_p = 2^p (Γ(p+1/2)/√π − Γ((p+1)/2)²/π) = Var|Z|^p.
pub fn mu_p(p: f64) -> Result<f64> {
    check_p(p)?;
    let g = gamma_fn(0.5 * (p + 1.0))?;
    Ok(2f64.powf(p) * (gamma_fn(p + 0.5)? / PI.sqrt() - g * g / PI))
}

/// Truncation policy for the infinite series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesTolerance {
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesTolerance {
    fn default() -> Self {
        Self { abs_tol: 1e-12, max_terms: 100_000 }
    }
}

/// Which rule stopped a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesStop {
    Tolerance,
    MaxTerms,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub terms: usize,
    pub stop: SeriesStop,
    /// Rough size of the neglected tail; zero when the tolerance rule fired.
    pub tail_estimate: f64,
}

impl SeriesValue {
    pub fn truncated(&self) -> bool {
        self.stop == SeriesStop::MaxTerms
    }
}

/// γ_p(x) = (1−x²)^{(p+1)/2} 2^p Σ_k (2x)^{2k} Γ((p+1)/2+k)² / (π (2k)!).
///
/// Terms are summed in log space so that the large series near |x| = 1 and
/// the small prefactor never meet in floating point separately.
pub fn gamma_p(p: f64, x: f64, tol: SeriesTolerance) -> Result<SeriesValue> {
    check_p(p)?;
    if !(x.abs() < 1.0) {
        return domain(format!("gamma_p requires |x| < 1, got {x}"));
    }
    let a = 0.5 * (p + 1.0);
    let log_pref = a * (1.0 - x * x).ln() + p * 2f64.ln() - PI.ln();
    if x == 0.0 {
        return Ok(SeriesValue {
            value: (log_pref + 2.0 * ln_gamma_unchecked(a)).exp(),
            terms: 1,
            stop: SeriesStop::Tolerance,
            tail_estimate: 0.0,
        });
    }
    let log_2x = (2.0 * x.abs()).ln();
    let mut sum = 0.0;
    let mut k = 0usize;
    loop {
        let kf = k as f64;
        let log_term = log_pref + 2.0 * kf * log_2x + 2.0 * ln_gamma_unchecked(a + kf)
            - ln_gamma_unchecked(2.0 * kf + 1.0);
        let term = log_term.exp();
        sum += term;
        k += 1;
        let ratio = 4.0 * x * x * (a + kf).powi(2) / ((2.0 * kf + 1.0) * (2.0 * kf + 2.0));
        let next = term * ratio;
        if ratio < 1.0 && next < tol.abs_tol {
            return Ok(SeriesValue { value: sum, terms: k, stop: SeriesStop::Tolerance, tail_estimate: 0.0 });
        }
        if k >= tol.max_terms {
            let tail = if ratio < 1.0 { next / (1.0 - ratio) } else { f64::INFINITY };
            return Ok(SeriesValue { value: sum, terms: k, stop: SeriesStop::MaxTerms, tail_estimate: tail });
        }
    }
}

/// ρ_H(j) = ½((j+1)^{2H} + |j−1|^{2H} − 2j^{2H}), the lag-j correlation of unit fGn.
pub fn rho_h(j: u64, h: f64) -> f64 {
    let jf = j as f64;
    let e = 2.0 * h;
    0.5 * ((jf + 1.0).powf(e) + (jf - 1.0).abs().powf(e) - 2.0 * jf.powf(e))
}

/// v₁² = μ_p + 2 Σ_{j≥1} (γ_p(ρ_H(j)) − γ_p(0)).
pub fn v1_squared(p: f64, h: f64, tol: SeriesTolerance) -> Result<SeriesValue> {
    check_p(p)?;
    if !(h > 0.0 && h < 0.75) {
        return domain(format!("v1_squared requires 0 < H < 3/4 (series diverges otherwise), got {h}"));
    }
    let g0 = gamma_p(p, 0.0, tol)?.value;
    let mut sum = 0.0;
    let mut j = 1u64;
    loop {
        let g = gamma_p(p, rho_h(j, h), tol)?.value;
        let term = g - g0;
        sum += term;
        if term.abs() < tol.abs_tol {
            return Ok(SeriesValue {
                value: mu_p(p)? + 2.0 * sum,
                terms: j as usize,
                stop: SeriesStop::Tolerance,
                tail_estimate: 0.0,
            });
        }
        if j as usize >= tol.max_terms {
            // Terms decay like j^{4H-4}; integrate that profile beyond the cut.
            let tail = 2.0 * term.abs() * j as f64 / (3.0 - 4.0 * h);
            return Ok(SeriesValue {
                value: mu_p(p)? + 2.0 * sum,
                terms: j as usize,
                stop: SeriesStop::MaxTerms,
                tail_estimate: tail,
            });
        }
        j += 1;
    }
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Standard normal quantile, `p` in (0, 1).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("normal quantile requires 0 < p < 1, got {p}"));
    }
    Ok(std_normal().inverse_cdf(p))
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal parameters are valid")
}
