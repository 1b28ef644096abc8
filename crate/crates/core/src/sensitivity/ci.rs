use serde::Serialize;

use super::{malliavin_sens, MalliavinConfig};
use crate::error::{Error, Result};
use crate::estimation::{sigma_confidence, ScalingMode, SigmaEstimate};
use crate::fbm::ModelParams;
use crate::grid::GridFunction;
use crate::ruin::{finite_diff_sens, kde_density_sens, mc_ruin, Bandwidth, FdScheme, SensitivityEstimate};

/// Sensitivity estimator used inside the interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum CiSensitivity {
    Malliavin(MalliavinConfig),
    FiniteDiff { eps: f64 },
    Kde,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CiConfig {
    pub u: f64,
    pub theta: f64,
    /// Ruin horizon T, independent of the observation span.
    pub horizon: f64,
    pub p: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub alpha: f64,
    pub scaling_mode: ScalingMode,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub sensitivity: CiSensitivity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceReport {
    pub psi_hat: f64,
    pub psi_se: f64,
    pub interval: [f64; 2],
    pub clamped: bool,
    pub half_width: f64,
    pub sigma: SigmaEstimate,
    pub sensitivity: SensitivityEstimate,
    pub v1: f64,
    pub c_p: f64,
    pub n_rate: f64,
    pub t0: f64,
    pub z: f64,
    pub scaling_mode: ScalingMode,
    pub warnings: Vec<String>,
}

/// Interval for Ψ_σ(u, T) from observed surplus data: σ̂ from power
/// variation, Ψ̂ and ∂σΨ̂ by Monte Carlo at σ̂, and the half-width
/// z_{α/2} |∂σΨ̂| sd(σ̂).
pub fn delta_method_ci(data: &GridFunction, cfg: &CiConfig, workers: Option<usize>) -> Result<ConfidenceReport> {
    if !(cfg.h > 0.5 && cfg.h < 0.75) {
        return Err(Error::Config(format!(
            "the interval pipeline needs H in (1/2, 3/4), got {}",
            cfg.h
        )));
    }
    let sigma = sigma_confidence(data, cfg.p, cfg.h, cfg.alpha, cfg.scaling_mode)?;
    let sd = sigma.sd.ok_or_else(|| Error::Numerical("no asymptotic sd for sigma".into()))?;
    if !(sigma.sigma_hat > 0.0) {
        return Err(Error::Numerical("estimated sigma is zero; the data carry no volatility".into()));
    }
    let params = ModelParams::new(cfg.u, cfg.theta, sigma.sigma_hat, cfg.h)?;
    let ruin = mc_ruin(&params, cfg.horizon, cfg.paths, cfg.steps, cfg.seed, workers)?;
    let sens = match cfg.sensitivity {
        CiSensitivity::Malliavin(m) => {
            malliavin_sens(&params, cfg.horizon, cfg.paths, cfg.steps, &m, cfg.seed, workers)?
        }
        CiSensitivity::FiniteDiff { eps } => finite_diff_sens(
            &params,
            cfg.horizon,
            eps,
            FdScheme::Central,
            true,
            cfg.paths,
            cfg.steps,
            cfg.seed,
            workers,
        )?,
        CiSensitivity::Kde => {
            kde_density_sens(&params, cfg.horizon, Bandwidth::Silverman, 0, cfg.paths, cfg.steps, cfg.seed, workers)?
        }
    };
    let half = sigma.z * sens.value.abs() * sd;
    let lo = ruin.psi_hat - half;
    let hi = ruin.psi_hat + half;
    let clamped = lo < 0.0 || hi > 1.0;
    let mut warnings = sigma.warnings.clone();
    warnings.extend(sens.warnings.iter().cloned());
    if sens.value == 0.0 {
        warnings.push("estimated sensitivity is zero: the interval has zero width".into());
    }
    if clamped {
        warnings.push("interval clamped to [0, 1]".into());
    }
    Ok(ConfidenceReport {
        psi_hat: ruin.psi_hat,
        psi_se: ruin.se,
        interval: [lo.max(0.0), hi.min(1.0)],
        clamped,
        half_width: half,
        v1: sigma.v1_squared.map_or(f64::NAN, f64::sqrt),
        c_p: sigma.c_p,
        n_rate: sigma.n_rate,
        t0: sigma.t0,
        z: sigma.z,
        scaling_mode: cfg.scaling_mode,
        sigma,
        sensitivity: sens,
        warnings,
    })
}
