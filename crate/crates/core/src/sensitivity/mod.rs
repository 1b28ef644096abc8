//! Malliavin-weight estimation of ∂Ψ/∂σ and the delta-method interval for Ψ.
//!
//! On an n-cell grid the path is a function of the fGn increments
//! ξ_j = W(1_{cell j}), a Gaussian vector with covariance Γ. Integration by
//! parts in that finite model is exact, so the weight is computed for the
//! H-projection of u_A onto cell indicators: coefficients Γ⁻¹q with
//! q_j = ∫_{cell j} ψ(Y_t) dt. The projection has the same inner products
//! with every cell indicator as u_A itself, which is all the weight uses.

mod ci;
mod dominating;
mod weight;

pub use ci::{delta_method_ci, CiConfig, CiSensitivity, ConfidenceReport};
pub use dominating::{dy_malliavin, grr_integral, y_process, DyMatrix, YProcess};
pub use weight::{
    malliavin_sens, malliavin_sens_detailed, malliavin_weight, malliavin_weight_dense,
    path_intermediates, skorokhod_divergence, u_a_path, MalliavinPathIntermediates, MalliavinRun,
    PathWeight, WeightContext,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fraccalc::QuadratureConfig;

/// Which event multiplies the weight.
///
/// Both have the same expectation because E[δ] = 0. `Ruin` uses 1{σM > u}
/// and gives ∂Ψ/∂σ directly; `SurvivalNegated` uses −1{σM < u}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum IndicatorForm {
    #[default]
    Ruin,
    SurvivalNegated,
}

impl std::str::FromStr for IndicatorForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ruin" => Ok(Self::Ruin),
            "survival-negated" => Ok(Self::SurvivalNegated),
            _ => Err(Error::Config(format!("unknown indicator '{s}' (ruin | survival-negated)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MalliavinConfig {
    /// Moment exponent of the dominating integral (even).
    pub r: u32,
    /// Singularity exponent m of the dominating integral (even).
    pub m_exp: u32,
    pub sharpness: f64,
    pub quad: QuadratureConfig,
    pub indicator: IndicatorForm,
}

impl MalliavinConfig {
    /// m = 2 and the smallest even r with rH > 4.
    pub fn for_hurst(h: f64) -> Self {
        let r = if h <= 2.0 / 3.0 { 8 } else { 6 };
        Self {
            r,
            m_exp: 2,
            sharpness: 1.0,
            quad: QuadratureConfig::default(),
            indicator: IndicatorForm::Ruin,
        }
    }

    pub fn validate(&self, h: f64) -> Result<()> {
        if self.r == 0 || !self.r.is_multiple_of(2) || self.m_exp == 0 || !self.m_exp.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "r and m_exp must be positive even integers, got r = {}, m_exp = {}",
                self.r, self.m_exp
            )));
        }
        if f64::from(self.r) * h <= f64::from(self.m_exp + 2) {
            return Err(Error::Config(format!(
                "need r·H > m_exp + 2, got r = {}, H = {h}, m_exp = {}",
                self.r, self.m_exp
            )));
        }
        if !(self.sharpness > 0.0 && self.sharpness.is_finite()) {
            return Err(Error::Config(format!("mollifier sharpness must be positive, got {}", self.sharpness)));
        }
        self.quad.validate()
    }

    pub(crate) fn kappa(&self) -> f64 {
        f64::from(self.m_exp) / f64::from(self.r)
    }
}

/// Smooth cutoff: 1 below u/(2σ), 0 above u/σ.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Mollifier {
    a: f64,
    b: f64,
    k: f64,
}

impl Mollifier {
    pub(crate) fn new(u: f64, sigma: f64, sharpness: f64) -> Self {
        Self { a: u / (2.0 * sigma), b: u / sigma, k: sharpness }
    }

    pub(crate) fn lower(&self) -> f64 {
        self.a
    }

    pub(crate) fn upper(&self) -> f64 {
        self.b
    }

    fn exponent(&self, x: f64) -> (f64, f64, f64) {
        let len = self.b - self.a;
        let p = (self.b - x) / len;
        let q = (x - self.a) / len;
        (self.k / p - self.k / q, p, q)
    }

    pub(crate) fn psi(&self, x: f64) -> f64 {
        if x <= self.a {
            1.0
        } else if x >= self.b {
            0.0
        } else {
            1.0 / (1.0 + self.exponent(x).0.exp())
        }
    }

    pub(crate) fn dpsi(&self, x: f64) -> f64 {
        if x <= self.a || x >= self.b {
            return 0.0;
        }
        let (z, p, q) = self.exponent(x);
        // ψ(1−ψ) = 1 / (4 cosh²(z/2))
        let c = (0.5 * z).cosh();
        let s = 0.25 / (c * c);
        -s * (self.k / (self.b - self.a)) * (1.0 / (p * p) + 1.0 / (q * q))
    }
}

fn check_mollifier_args(x: f64, u: f64, sigma: f64, sharpness: f64) -> Result<()> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("mollifier argument must be nonnegative, got {x}")));
    }
    if !(u > 0.0 && sigma > 0.0 && sharpness > 0.0) {
        return Err(Error::Domain("mollifier needs u, sigma and sharpness positive".into()));
    }
    Ok(())
}

/// ψ(x) = h(p) / (h(p) + h(q)) with h(s) = exp(−k/s), p = (b−x)/(b−a),
/// q = (x−a)/(b−a), a = u/(2σ), b = u/σ.
pub fn mollifier_psi(x: f64, u: f64, sigma: f64, sharpness: f64) -> Result<f64> {
    check_mollifier_args(x, u, sigma, sharpness)?;
    Ok(Mollifier::new(u, sigma, sharpness).psi(x))
}

/// dψ/dx.
pub fn mollifier_dpsi(x: f64, u: f64, sigma: f64, sharpness: f64) -> Result<f64> {
    check_mollifier_args(x, u, sigma, sharpness)?;
    Ok(Mollifier::new(u, sigma, sharpness).dpsi(x))
}
