//! Monte Carlo ruin probability and two sensitivity estimators that do not
//! use Malliavin weights.
//!
//! Ruin on the grid happens iff σM > u with M = max_i (W_{t_i} − θt_i), so one
//! maximum per path serves the ruin estimate, finite differences in σ and the
//! density of M.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fbm::{sup_drifted, FbmSampler, ModelParams};
use crate::grid::TimeGrid;
use crate::mc::{derive_seed, map_paths, mean_se};
use crate::special::{normal_cdf, normal_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuinEstimate {
    pub psi_hat: f64,
    pub se: f64,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
}

impl RuinEstimate {
    fn from_count(hits: usize, m: usize, n: usize, seed: u64) -> Self {
        let p = hits as f64 / m as f64;
        Self { psi_hat: p, se: (p * (1.0 - p) / m as f64).sqrt(), m, n, seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensitivityMethod {
    FiniteDiffForward,
    FiniteDiffCentral,
    KdeDensity,
    Malliavin,
}

/// An estimate of ∂Ψ/∂σ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityEstimate {
    pub value: f64,
    pub se: f64,
    pub method: SensitivityMethod,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub method_params: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
}

impl SensitivityEstimate {
    /// Half-width of the normal interval at the given two-sided level.
    pub fn half_width(&self, z: f64) -> f64 {
        z * self.se
    }
}

fn check_mc(m: usize, n: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::Usage("path count must be at least 1".into()));
    }
    if n < 2 {
        return Err(Error::Usage(format!("grid needs at least 2 steps, got {n}")));
    }
    Ok(())
}

/// Grid maxima of W − θt for paths 0..m.
pub fn sample_sup(
    h: f64,
    theta: f64,
    grid: TimeGrid,
    m: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<Vec<f64>> {
    check_mc(m, grid.steps())?;
    let sampler = FbmSampler::new(grid, h)?;
    map_paths(&sampler, seed, m, workers, |_, w| sup_drifted(w, &grid, theta, 1).0)
}

/// Grid maxima of the same paths sub-sampled with each stride in `strides`.
///
/// Row k holds the maxima over every `strides[k]`-th node, so refinement
/// studies share their random draws.
pub fn sample_sup_nested(
    h: f64,
    theta: f64,
    grid: TimeGrid,
    strides: &[usize],
    m: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    check_mc(m, grid.steps())?;
    for &s in strides {
        grid.coarsen(s)?;
    }
    let sampler = FbmSampler::new(grid, h)?;
    let per_path = map_paths(&sampler, seed, m, workers, |_, w| {
        strides.iter().map(|&s| sup_drifted(w, &grid, theta, s).0).collect::<Vec<_>>()
    })?;
    Ok((0..strides.len()).map(|k| per_path.iter().map(|row| row[k]).collect()).collect())
}

/// Ruin frequency σM > u over a sample of maxima.
pub fn ruin_from_sup(sup: &[f64], params: &ModelParams, n: usize, seed: u64) -> RuinEstimate {
    let hits = sup.iter().filter(|&&m| params.sigma * m > params.u).count();
    RuinEstimate::from_count(hits, sup.len(), n, seed)
}

/// Monte Carlo estimate of Ψ_σ(u, T) on an n-step grid.
pub fn mc_ruin(
    params: &ModelParams,
    horizon: f64,
    m: usize,
    n: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<RuinEstimate> {
    params.validate()?;
    let grid = TimeGrid::new(horizon, n)?;
    let sup = sample_sup(params.h, params.theta, grid, m, seed, workers)?;
    Ok(ruin_from_sup(&sup, params, n, seed))
}

fn check_brownian(params: &ModelParams, horizon: f64) -> Result<()> {
    params.validate()?;
    if params.h != 0.5 {
        return Err(Error::Domain(format!("closed form needs H = 1/2, got {}", params.h)));
    }
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    Ok(())
}

/// P(sup_{t≤T}(W_t − θt) > u/σ) for Brownian W:
/// Φ((−a−θT)/√T) + e^{−2θa} Φ((−a+θT)/√T), a = u/σ.
pub fn bm_closed_form(params: &ModelParams, horizon: f64) -> Result<f64> {
    check_brownian(params, horizon)?;
    let a = params.u / params.sigma;
    let (th, t) = (params.theta, horizon);
    let st = t.sqrt();
    Ok(normal_cdf((-a - th * t) / st) + (-2.0 * th * a).exp() * normal_cdf((-a + th * t) / st))
}

/// Density at `a` of sup_{t≤T}(W_t − θt) for Brownian W.
pub fn bm_sup_density(a: f64, theta: f64, horizon: f64) -> f64 {
    let st = horizon.sqrt();
    2.0 * normal_pdf((a + theta * horizon) / st) / st
        + 2.0 * theta * (-2.0 * theta * a).exp() * normal_cdf((theta * horizon - a) / st)
}

/// ∂Ψ/∂σ of the closed form, (u/σ²) f_M(u/σ).
pub fn bm_closed_form_sigma_derivative(params: &ModelParams, horizon: f64) -> Result<f64> {
    check_brownian(params, horizon)?;
    let a = params.u / params.sigma;
    Ok(params.u / (params.sigma * params.sigma) * bm_sup_density(a, params.theta, horizon))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdScheme {
    Forward,
    Central,
}

/// Difference quotient from a shared sample of maxima (common random numbers).
pub fn finite_diff_from_sup(sup: &[f64], params: &ModelParams, eps: f64, scheme: FdScheme) -> (f64, f64) {
    let hit = |sigma: f64, m: f64| if sigma * m > params.u { 1.0 } else { 0.0 };
    let s = params.sigma;
    let d: Vec<f64> = match scheme {
        FdScheme::Forward => sup.iter().map(|&m| (hit(s + eps, m) - hit(s, m)) / eps).collect(),
        FdScheme::Central => sup.iter().map(|&m| (hit(s + eps, m) - hit(s - eps, m)) / (2.0 * eps)).collect(),
    };
    mean_se(&d)
}

/// Finite-difference estimate of ∂Ψ/∂σ.
///
/// With `crn` both ruin probabilities use the same paths; otherwise each uses
/// its own derived seed.
#[allow(clippy::too_many_arguments)]
pub fn finite_diff_sens(
    params: &ModelParams,
    horizon: f64,
    eps: f64,
    scheme: FdScheme,
    crn: bool,
    m: usize,
    n: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<SensitivityEstimate> {
    params.validate()?;
    if !(eps > 0.0 && eps < params.sigma) {
        return Err(Error::Domain(format!("eps must lie in (0, sigma = {}), got {eps}", params.sigma)));
    }
    let grid = TimeGrid::new(horizon, n)?;
    let (value, se) = if crn {
        let sup = sample_sup(params.h, params.theta, grid, m, seed, workers)?;
        finite_diff_from_sup(&sup, params, eps, scheme)
    } else {
        let (hi, lo, width) = match scheme {
            FdScheme::Forward => (params.sigma + eps, params.sigma, eps),
            FdScheme::Central => (params.sigma + eps, params.sigma - eps, 2.0 * eps),
        };
        let a = sample_sup(params.h, params.theta, grid, m, derive_seed(seed, 1), workers)?;
        let b = sample_sup(params.h, params.theta, grid, m, derive_seed(seed, 2), workers)?;
        let pa = ruin_from_sup(&a, &params.with_sigma(hi), n, seed);
        let pb = ruin_from_sup(&b, &params.with_sigma(lo), n, seed);
        ((pa.psi_hat - pb.psi_hat) / width, (pa.se.powi(2) + pb.se.powi(2)).sqrt() / width)
    };
    let method = match scheme {
        FdScheme::Forward => SensitivityMethod::FiniteDiffForward,
        FdScheme::Central => SensitivityMethod::FiniteDiffCentral,
    };
    let mut method_params = BTreeMap::new();
    method_params.insert("eps".into(), json!(eps));
    method_params.insert("crn".into(), json!(crn));
    Ok(SensitivityEstimate { value, se, method, m, n, seed, method_params, warnings: Vec::new() })
}

/// Bandwidth choice for the density estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    Silverman,
    Fixed(f64),
}

/// 0.9 · min(sd, IQR/1.34) · m^{-1/5}.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Gaussian-kernel density of a sample at `x`, with bootstrap standard error.
pub fn kde_at(xs: &[f64], x: f64, bandwidth: f64, bootstrap: usize, seed: u64) -> (f64, f64) {
    let k: Vec<f64> = xs.iter().map(|&v| normal_pdf((x - v) / bandwidth) / bandwidth).collect();
    let m = k.len();
    let value = k.iter().sum::<f64>() / m as f64;
    if bootstrap < 2 {
        return (value, f64::NAN);
    }
    let reps: Vec<f64> = (0..bootstrap as u64)
        .map(|b| {
            let mut rng = crate::fbm::path_rng(seed, b);
            (0..m).map(|_| k[rng.gen_range(0..m)]).sum::<f64>() / m as f64
        })
        .collect();
    let mean = reps.iter().sum::<f64>() / bootstrap as f64;
    let sd = (reps.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (bootstrap as f64 - 1.0)).sqrt();
    (value, sd)
}

/// Density-based estimate from a sample of maxima: ∂Ψ/∂σ = (u/σ²) f_M(u/σ).
pub fn kde_from_sup(
    sup: &[f64],
    params: &ModelParams,
    bandwidth: Bandwidth,
    bootstrap: usize,
    seed: u64,
) -> Result<(f64, f64, f64, Vec<String>)> {
    if sup.len() < 2 {
        return Err(Error::Usage("density estimate needs at least 2 paths".into()));
    }
    let h = match bandwidth {
        Bandwidth::Silverman => silverman_bandwidth(sup),
        Bandwidth::Fixed(h) if h > 0.0 => h,
        Bandwidth::Fixed(h) => return Err(Error::Domain(format!("bandwidth must be positive, got {h}"))),
    };
    let x = params.u / params.sigma;
    let (lo, hi) = sup.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let mut warnings = Vec::new();
    if x < lo || x > hi {
        warnings.push(format!(
            "density evaluated at u/sigma = {x} outside sample range [{lo}, {hi}]; value is an extrapolation"
        ));
    }
    let (f, f_se) = kde_at(sup, x, h, bootstrap, derive_seed(seed, 0x6b6465));
    let scale = params.u / (params.sigma * params.sigma);
    Ok((scale * f, scale * f_se, h, warnings))
}

/// Kernel density estimate of ∂Ψ/∂σ.
#[allow(clippy::too_many_arguments)]
pub fn kde_density_sens(
    params: &ModelParams,
    horizon: f64,
    bandwidth: Bandwidth,
    bootstrap: usize,
    m: usize,
    n: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<SensitivityEstimate> {
    params.validate()?;
    let grid = TimeGrid::new(horizon, n)?;
    let sup = sample_sup(params.h, params.theta, grid, m, seed, workers)?;
    let (value, se, h, warnings) = kde_from_sup(&sup, params, bandwidth, bootstrap, seed)?;
    let mut method_params = BTreeMap::new();
    method_params.insert("bandwidth".into(), json!(h));
    method_params.insert(
        "bandwidth_rule".into(),
        json!(match bandwidth {
            Bandwidth::Silverman => "silverman",
            Bandwidth::Fixed(_) => "fixed",
        }),
    );
    method_params.insert("bootstrap".into(), json!(bootstrap));
    Ok(SensitivityEstimate {
        value,
        se,
        method: SensitivityMethod::KdeDensity,
        m,
        n,
        seed,
        method_params,
        warnings,
    })
}
