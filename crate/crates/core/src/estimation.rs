//! Power variation and the volatility estimator
//! σ̂ = (V_p / (c_p n^{1−pH} T₀))^{1/p} with its CLT interval.
//!
//! `n` is the sampling rate (observations per unit time): for N steps over
//! [0, T₀] it is N/T₀, which is how the estimator normalizes V by both n and
//! T₀.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbm::{surplus, FbmSampler, ModelParams};
use crate::grid::{GridFunction, TimeGrid};
use crate::mc::map_sampled_paths;
use crate::special::{c_p, normal_quantile, v1_squared, SeriesTolerance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerVariationReport {
    pub p: f64,
    /// Difference order; only first differences are supported.
    pub k: u32,
    #[serde(rename = "V")]
    pub v: f64,
    pub n: usize,
    pub t: f64,
}

/// Σ |x_i − x_{i−1}|^p over all increments.
pub fn power_variation(x: &GridFunction, p: f64) -> Result<PowerVariationReport> {
    power_variation_upto(x, p, x.grid().steps())
}

/// Power variation over the first `upto` increments.
pub fn power_variation_upto(x: &GridFunction, p: f64, upto: usize) -> Result<PowerVariationReport> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("power p must exceed 1, got {p}")));
    }
    let vals = x.values();
    if vals.len() < 2 {
        return Err(Error::Usage("power variation needs at least 2 nodes".into()));
    }
    if upto > x.grid().steps() {
        return Err(Error::Usage(format!("index {upto} beyond {} steps", x.grid().steps())));
    }
    let v = vals[..=upto].windows(2).map(|w| (w[1] - w[0]).abs().powf(p)).sum();
    Ok(PowerVariationReport { p, k: 1, v, n: x.grid().steps(), t: x.grid().t(upto) })
}

fn check_estimator_hurst(h: f64) -> Result<()> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain(format!("Hurst index must lie in (0, 1), got {h}")));
    }
    Ok(())
}

/// σ̂ with t = T₀ the last grid time. Zero power variation gives 0.
pub fn sigma_hat(x: &GridFunction, p: f64, h: f64) -> Result<f64> {
    check_estimator_hurst(h)?;
    let pv = power_variation(x, p)?;
    let cp = c_p(p)?;
    let rate = pv.n as f64 / pv.t;
    Ok((pv.v / (cp * rate.powf(1.0 - p * h) * pv.t)).powf(1.0 / p))
}

/// How the asymptotic sd depends on the observation span T₀.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMode {
    /// sd = v₁σ̂√T₀ / (p c_p √n).
    SpanScaled,
    /// sd = v₁σ̂ / (p c_p √(n T₀)) = v₁σ̂ / (p c_p √N).
    #[default]
    VarianceDecay,
}

impl std::str::FromStr for ScalingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "span-scaled" => Ok(Self::SpanScaled),
            "variance-decay" => Ok(Self::VarianceDecay),
            _ => Err(Error::Config(format!("unknown scaling mode '{s}' (span-scaled | variance-decay)"))),
        }
    }
}

/// Constants of the CLT for a given (p, H).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CltConstants {
    pub p: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub c_p: f64,
    pub v1_squared: f64,
    pub v1_terms: usize,
    pub v1_truncated: bool,
}

impl CltConstants {
    pub fn new(p: f64, h: f64) -> Result<Self> {
        let v = v1_squared(p, h, SeriesTolerance::default())?;
        Ok(Self { p, h, c_p: c_p(p)?, v1_squared: v.value, v1_terms: v.terms, v1_truncated: v.truncated() })
    }

    pub fn v1(&self) -> f64 {
        self.v1_squared.sqrt()
    }

    /// Asymptotic sd of σ̂ for rate `n` and span `t0`.
    pub fn sd(&self, sigma_hat: f64, n_rate: f64, t0: f64, mode: ScalingMode) -> f64 {
        let base = self.v1() * sigma_hat / (self.p * self.c_p * n_rate.sqrt());
        match mode {
            ScalingMode::SpanScaled => base * t0.sqrt(),
            ScalingMode::VarianceDecay => base / t0.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaEstimate {
    pub sigma_hat: f64,
    pub sigma_hat_p: f64,
    /// Asymptotic sd under `scaling_mode`; absent when the CLT does not apply.
    pub sd: Option<f64>,
    pub scaling_mode: ScalingMode,
    pub alpha: f64,
    pub interval: Option<[f64; 2]>,
    pub z: f64,
    pub sd_span_scaled: Option<f64>,
    pub sd_variance_decay: Option<f64>,
    pub p: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub power_variation: f64,
    pub c_p: f64,
    pub v1_squared: Option<f64>,
    pub n_rate: f64,
    pub n_steps: usize,
    pub t0: f64,
    pub warnings: Vec<String>,
}

/// σ̂ with a two-sided level-(1−α) normal interval.
pub fn sigma_confidence(x: &GridFunction, p: f64, h: f64, alpha: f64, mode: ScalingMode) -> Result<SigmaEstimate> {
    let consts = if h > 0.0 && h < 0.75 { Some(CltConstants::new(p, h)?) } else { None };
    sigma_confidence_with(x, p, h, alpha, mode, consts.as_ref())
}

/// As [`sigma_confidence`] with precomputed constants (`None` when H ≥ 3/4).
pub fn sigma_confidence_with(
    x: &GridFunction,
    p: f64,
    h: f64,
    alpha: f64,
    mode: ScalingMode,
    consts: Option<&CltConstants>,
) -> Result<SigmaEstimate> {
    check_estimator_hurst(h)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let pv = power_variation(x, p)?;
    let cp = c_p(p)?;
    let rate = pv.n as f64 / pv.t;
    let s = (pv.v / (cp * rate.powf(1.0 - p * h) * pv.t)).powf(1.0 / p);
    let z = normal_quantile(1.0 - alpha / 2.0)?;
    let mut warnings = Vec::new();
    if pv.v == 0.0 {
        warnings.push("zero power variation: degenerate data, estimate is 0".into());
    }
    let mut out = SigmaEstimate {
        sigma_hat: s,
        sigma_hat_p: s.powf(p),
        sd: None,
        scaling_mode: mode,
        alpha,
        interval: None,
        z,
        sd_span_scaled: None,
        sd_variance_decay: None,
        p,
        h,
        power_variation: pv.v,
        c_p: cp,
        v1_squared: None,
        n_rate: rate,
        n_steps: pv.n,
        t0: pv.t,
        warnings,
    };
    if h >= 0.75 {
        out.warnings.push(format!("H = {h} >= 3/4: CLT unavailable, point estimate only"));
        return Ok(out);
    }
    let owned;
    let c = match consts {
        Some(c) if c.p == p && c.h == h => c,
        _ => {
            owned = CltConstants::new(p, h)?;
            &owned
        }
    };
    if c.v1_truncated {
        out.warnings.push(format!("v1^2 series stopped at {} terms before reaching tolerance", c.v1_terms));
    }
    let ss = c.sd(s, rate, pv.t, ScalingMode::SpanScaled);
    let vd = c.sd(s, rate, pv.t, ScalingMode::VarianceDecay);
    let sd = match mode {
        ScalingMode::SpanScaled => ss,
        ScalingMode::VarianceDecay => vd,
    };
    out.sd = Some(sd);
    out.sd_span_scaled = Some(ss);
    out.sd_variance_decay = Some(vd);
    out.v1_squared = Some(c.v1_squared);
    out.interval = Some([s - z * sd, s + z * sd]);
    Ok(out)
}

/// Results of a replicated estimation experiment on simulated surplus paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub replications: usize,
    pub mean_sigma_hat: f64,
    pub sd_sigma_hat: f64,
    pub predicted_sd: f64,
    pub coverage_span_scaled: f64,
    pub coverage_variance_decay: f64,
}

/// Simulates `reps` surplus paths with known σ and records σ̂ and interval coverage.
#[allow(clippy::too_many_arguments)]
pub fn coverage_experiment(
    params: &ModelParams,
    t0: f64,
    steps: usize,
    p: f64,
    alpha: f64,
    reps: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<CoverageReport> {
    params.validate()?;
    let grid = TimeGrid::new(t0, steps)?;
    let consts = CltConstants::new(p, params.h)?;
    let sampler = FbmSampler::new(grid, params.h)?;
    let rows = map_sampled_paths(&sampler, seed, reps, workers, |path| -> Result<(f64, bool, bool)> {
        let x = surplus(path, params)?;
        let a = sigma_confidence_with(&x, p, params.h, alpha, ScalingMode::SpanScaled, Some(&consts))?;
        let inside = |lo: f64, hi: f64| lo <= params.sigma && params.sigma <= hi;
        let z = a.z;
        let (ss, vd) = (a.sd_span_scaled.unwrap_or(0.0), a.sd_variance_decay.unwrap_or(0.0));
        let s = a.sigma_hat;
        Ok((s, inside(s - z * ss, s + z * ss), inside(s - z * vd, s + z * vd)))
    })?;
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let nf = reps as f64;
    let mean = rows.iter().map(|r| r.0).sum::<f64>() / nf;
    let sd = (rows.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    Ok(CoverageReport {
        replications: reps,
        mean_sigma_hat: mean,
        sd_sigma_hat: sd,
        predicted_sd: consts.sd(params.sigma, steps as f64 / t0, t0, ScalingMode::VarianceDecay),
        coverage_span_scaled: rows.iter().filter(|r| r.1).count() as f64 / nf,
        coverage_variance_decay: rows.iter().filter(|r| r.2).count() as f64 / nf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::sample_fbm;
    use proptest::prelude::*;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn power_variation_cases() {
        let c = GridFunction::from_fn(grid(10), |_| 3.0).unwrap();
        assert_eq!(power_variation(&c, 2.0).unwrap().v, 0.0);
        let n = 64;
        let lin = GridFunction::from_fn(grid(n), |t| t).unwrap();
        for &p in &[1.5, 2.0, 3.0] {
            let v = power_variation(&lin, p).unwrap().v;
            assert!((v - (n as f64).powf(1.0 - p)).abs() < 1e-12);
        }
        assert!(power_variation(&lin, 1.0).is_err());
    }

    #[test]
    fn quadratic_variation_matches_loop() {
        let path = sample_fbm(grid(500), 0.6, 3).unwrap();
        let x = GridFunction::new(path.grid, path.w.clone()).unwrap();
        let mut brute = 0.0;
        for i in 1..path.w.len() {
            let d = path.w[i] - path.w[i - 1];
            brute += d * d;
        }
        assert!((power_variation(&x, 2.0).unwrap().v - brute).abs() < 1e-12 * brute);
    }

    #[test]
    fn formula_inversion() {
        // Increments of equal size δ give V = n δ^p; choose δ so that σ̂ = σ₀.
        let (n, t, p, h, s0): (usize, f64, f64, f64, f64) = (256, 2.0, 2.5, 0.6, 0.8);
        let cp = c_p(p).unwrap();
        let rate = n as f64 / t;
        let v = cp * rate.powf(1.0 - p * h) * t * s0.powf(p);
        let delta = (v / n as f64).powf(1.0 / p);
        let x = GridFunction::from_fn(TimeGrid::new(t, n).unwrap(), |tt| tt / t * n as f64 * delta).unwrap();
        assert!((sigma_hat(&x, p, h).unwrap() - s0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_data_warns() {
        let c = GridFunction::from_fn(grid(10), |_| 1.0).unwrap();
        let e = sigma_confidence(&c, 2.0, 0.6, 0.05, ScalingMode::VarianceDecay).unwrap();
        assert_eq!(e.sigma_hat, 0.0);
        assert!(!e.warnings.is_empty());
    }

    #[test]
    fn interval_is_symmetric_and_contains_estimate() {
        let path = sample_fbm(grid(4096), 0.6, 8).unwrap();
        let x = GridFunction::new(path.grid, path.w).unwrap();
        let e = sigma_confidence(&x, 2.0, 0.6, 0.05, ScalingMode::VarianceDecay).unwrap();
        let [lo, hi] = e.interval.unwrap();
        assert!(lo <= e.sigma_hat && e.sigma_hat <= hi);
        assert!(((e.sigma_hat - lo) - (hi - e.sigma_hat)).abs() < 1e-14);
        assert!((e.sigma_hat - 1.0).abs() < 0.1);
    }

    #[test]
    fn brownian_case_uses_mu_p_only() {
        let path = sample_fbm(grid(1000), 0.5, 2).unwrap();
        let x = GridFunction::new(path.grid, path.w).unwrap();
        let e = sigma_confidence(&x, 2.0, 0.5, 0.05, ScalingMode::VarianceDecay).unwrap();
        let want = 2f64.sqrt() * e.sigma_hat / (2.0 * 1.0 * 1000f64.sqrt());
        assert!((e.sd.unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn modes_coincide_on_unit_span_and_differ_otherwise() {
        let path = sample_fbm(TimeGrid::new(4.0, 2048).unwrap(), 0.6, 2).unwrap();
        let x = GridFunction::new(path.grid, path.w).unwrap();
        let e = sigma_confidence(&x, 2.0, 0.6, 0.05, ScalingMode::SpanScaled).unwrap();
        assert!((e.sd_span_scaled.unwrap() / e.sd_variance_decay.unwrap() - 4.0).abs() < 1e-12);
        let unit = sample_fbm(grid(2048), 0.6, 2).unwrap();
        let xu = GridFunction::new(unit.grid, unit.w).unwrap();
        let eu = sigma_confidence(&xu, 2.0, 0.6, 0.05, ScalingMode::SpanScaled).unwrap();
        assert_eq!(eu.sd_span_scaled, eu.sd_variance_decay);
    }

    #[test]
    fn collapsing_level() {
        let path = sample_fbm(grid(256), 0.6, 2).unwrap();
        let x = GridFunction::new(path.grid, path.w).unwrap();
        let e = sigma_confidence(&x, 2.0, 0.6, 1.0 - 1e-12, ScalingMode::VarianceDecay).unwrap();
        let [lo, hi] = e.interval.unwrap();
        assert!(hi - lo < 1e-9);
    }

    #[test]
    fn no_clt_above_three_quarters() {
        let path = sample_fbm(grid(256), 0.8, 2).unwrap();
        let x = GridFunction::new(path.grid, path.w).unwrap();
        let e = sigma_confidence(&x, 2.0, 0.8, 0.05, ScalingMode::VarianceDecay).unwrap();
        assert!(e.interval.is_none() && e.sd.is_none());
        assert!(e.warnings.iter().any(|w| w.contains("3/4")));
    }

    #[test]
    fn width_scales_like_inverse_root_n() {
        let mut widths = Vec::new();
        for &n in &[1usize << 10, 1 << 12, 1 << 14] {
            let path = sample_fbm(grid(n), 0.6, 31).unwrap();
            let x = GridFunction::new(path.grid, path.w).unwrap();
            let e = sigma_confidence(&x, 2.0, 0.6, 0.05, ScalingMode::VarianceDecay).unwrap();
            let [lo, hi] = e.interval.unwrap();
            widths.push((hi - lo) * (n as f64).sqrt());
        }
        for w in &widths[1..] {
            assert!((w / widths[0] - 1.0).abs() < 0.1, "{widths:?}");
        }
    }

    #[test]
    fn consistency_on_long_paths() {
        // σ̂ ∈ (0.95, 1.05) on every one of 100 paths at n = 2^14.
        let params = ModelParams::new(1.0, 1.0, 1.0, 0.6).unwrap();
        let g = grid(1 << 14);
        let sampler = FbmSampler::new(g, 0.6).unwrap();
        let est = map_sampled_paths(&sampler, 77, 100, None, |path| {
            sigma_hat(&surplus(path, &params).unwrap(), 2.0, 0.6).unwrap()
        })
        .unwrap();
        assert!(est.iter().all(|s| (s - 1.0).abs() < 0.05));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("span-scaled".parse::<ScalingMode>().unwrap(), ScalingMode::SpanScaled);
        assert!("other".parse::<ScalingMode>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn scale_and_shift(seed in 0u64..500, c in 0.1f64..10.0, shift in -5.0f64..5.0, p in 1.2f64..4.0) {
            let path = sample_fbm(grid(256), 0.6, seed).unwrap();
            let x = GridFunction::new(path.grid, path.w.clone()).unwrap();
            let s = sigma_hat(&x, p, 0.6).unwrap();
            let scaled = x.map(|_, v| c * v);
            prop_assert!((sigma_hat(&scaled, p, 0.6).unwrap() - c * s).abs() <= 1e-10 * c * s);
            let shifted = x.map(|_, v| v + shift);
            prop_assert!((sigma_hat(&shifted, p, 0.6).unwrap() - s).abs() <= 1e-9 * s);
        }

        #[test]
        fn power_variation_monotone_in_time(seed in 0u64..500, p in 1.1f64..4.0) {
            let path = sample_fbm(grid(64), 0.6, seed).unwrap();
            let x = GridFunction::new(path.grid, path.w).unwrap();
            let mut prev = 0.0;
            for i in 1..=64 {
                let v = power_variation_upto(&x, p, i).unwrap().v;
                prop_assert!(v >= prev);
                prev = v;
            }
        }
    }
}
