use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::json;

use super::dominating::{a_from_j, dy_malliavin, grr_integral, DyMatrix};
use super::{IndicatorForm, MalliavinConfig, Mollifier};
use crate::error::{Error, Result};
use crate::fbm::{running_sup_drifted, FbmSampler, ModelParams, SampledPath};
use crate::fraccalc::{check_h_above_half, fgn_gram, u_a_compact, QuadratureConfig};
use crate::grid::{FlaggedGridFunction, GridFunction, StepFunction, TimeGrid};
use crate::linalg::Cholesky;
use crate::mc::{map_sampled_paths, mean_se};
use crate::quadrature::GaussLegendre;
use crate::ruin::{SensitivityEstimate, SensitivityMethod};

/// Paths whose weight denominator falls below this multiple of σT are excluded.
const DENOM_FLOOR: f64 = 1e-12;

/// Per-path outcome of the weight computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathWeight {
    pub path_index: u64,
    /// max_i (W_{t_i} − θt_i)
    pub m: f64,
    pub tau: usize,
    /// σ ∫_0^T ψ(Y_t) dt
    pub denom: f64,
    pub a_t: f64,
    /// The event of the configured indicator form occurred.
    pub indicator: bool,
    /// δ(v); only computed when the indicator is set.
    pub weight: Option<f64>,
    /// Signed indicator times weight, the Monte Carlo summand.
    pub contribution: f64,
    pub excluded: bool,
    /// Y_t ≥ |W_t − θt| at every node.
    pub dominated: bool,
}

/// Everything the weight needs that does not depend on the path.
pub struct WeightContext {
    grid: TimeGrid,
    params: ModelParams,
    config: MalliavinConfig,
    chol: Cholesky,
    moll: Mollifier,
    gl: GaussLegendre,
}

/// The pieces of the projected weight for one path.
struct Galerkin {
    m: f64,
    tau: usize,
    q: Vec<f64>,
    qp: Vec<f64>,
    da: Vec<f64>,
    xi: Vec<f64>,
}

impl WeightContext {
    pub fn new(grid: TimeGrid, params: &ModelParams, config: &MalliavinConfig) -> Result<Self> {
        params.validate()?;
        check_h_above_half(params.h)?;
        config.validate(params.h)?;
        let n = grid.steps();
        let gram = fgn_gram(n, params.h, grid.dt());
        let chol = Cholesky::factor(n, &gram)?;
        Ok(Self {
            grid,
            params: *params,
            config: *config,
            chol,
            moll: Mollifier::new(params.u, params.sigma, config.sharpness),
            gl: GaussLegendre::new(16),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Times where A t^κ crosses the lower and upper mollifier levels.
    fn crossings(&self, a_t: f64) -> (f64, f64) {
        if !(a_t > 0.0) {
            return (f64::INFINITY, f64::INFINITY);
        }
        let inv = 1.0 / self.config.kappa();
        ((self.moll.lower() / a_t).powf(inv), (self.moll.upper() / a_t).powf(inv))
    }

    /// ∫_0^T ψ(A t^κ) dt.
    fn psi_integral(&self, a_t: f64) -> f64 {
        let horizon = self.grid.horizon();
        let (ta, tb) = self.crossings(a_t);
        let mut s = ta.min(horizon);
        if ta < horizon {
            let kappa = self.config.kappa();
            let panels = 4 * self.config.quad.refinement;
            s += self.gl.integrate_composite(ta, tb.min(horizon), panels, |t| self.moll.psi(a_t * t.powf(kappa)));
        }
        s
    }

    /// q_j = ∫_{cell j} ψ(A t^κ) dt and q'_j = ∫_{cell j} ψ'(A t^κ) t^κ dt.
    fn cell_integrals(&self, a_t: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.steps();
        let kappa = self.config.kappa();
        let (ta, tb) = self.crossings(a_t);
        let mut q = vec![0.0; n];
        let mut qp = vec![0.0; n];
        for j in 0..n {
            let (lo, hi) = (self.grid.t(j), self.grid.t(j + 1));
            if lo >= tb {
                break;
            }
            q[j] = (hi.min(ta) - lo).max(0.0);
            let (c0, c1) = (lo.max(ta), hi.min(tb));
            if c1 > c0 {
                let panels = self.config.quad.refinement;
                q[j] += self.gl.integrate_composite(c0, c1, panels, |t| self.moll.psi(a_t * t.powf(kappa)));
                qp[j] = self.gl.integrate_composite(c0, c1, panels, |t| {
                    let tk = t.powf(kappa);
                    self.moll.dpsi(a_t * tk) * tk
                });
            }
        }
        (q, qp)
    }

    fn drifted(&self, path: &SampledPath) -> Vec<f64> {
        path.w.iter().enumerate().map(|(i, w)| w - self.params.theta * self.grid.t(i)).collect()
    }

    fn check_path(&self, path: &SampledPath) -> Result<()> {
        self.grid.check_same(&path.grid)?;
        if (path.h - self.params.h).abs() > 1e-12 {
            return Err(Error::Usage(format!("path has H = {}, model has H = {}", path.h, self.params.h)));
        }
        Ok(())
    }

    /// Screening pass: M, τ, A_T, denominator and indicator.
    fn screen(&self, path: &SampledPath) -> Result<PathWeight> {
        self.check_path(path)?;
        let z = self.drifted(path);
        let (m, tau) = running_sup_drifted(path, self.params.theta);
        let (j, _) = grr_integral(&z, self.grid.dt(), self.config.r, self.config.m_exp, false);
        if !j.is_finite() {
            return Err(Error::Numerical(format!("dominating integral overflowed on path {}", path.path_index)));
        }
        let a_t = a_from_j(j, &self.config);
        let kappa = self.config.kappa();
        let dominated = z.iter().enumerate().all(|(i, zi)| a_t * self.grid.t(i).powf(kappa) >= zi.abs());
        let denom = self.params.sigma * self.psi_integral(a_t);
        let ruin = self.params.sigma * m > self.params.u;
        let indicator = match self.config.indicator {
            IndicatorForm::Ruin => ruin,
            IndicatorForm::SurvivalNegated => self.params.sigma * m < self.params.u,
        };
        let excluded = denom < DENOM_FLOOR * self.params.sigma * self.grid.horizon();
        Ok(PathWeight {
            path_index: path.path_index,
            m,
            tau,
            denom,
            a_t,
            indicator,
            weight: None,
            contribution: 0.0,
            excluded,
            dominated,
        })
    }

    fn galerkin(&self, path: &SampledPath, screened: &PathWeight) -> Galerkin {
        let z = self.drifted(path);
        let (j, dj) = grr_integral(&z, self.grid.dt(), self.config.r, self.config.m_exp, true);
        let dj = dj.expect("gradient requested");
        let a_t = screened.a_t;
        let scale = if j > 0.0 { a_t / (f64::from(self.config.r) * j) } else { 0.0 };
        let da = dj.iter().map(|d| scale * d).collect();
        let (q, qp) = self.cell_integrals(a_t);
        Galerkin { m: screened.m, tau: screened.tau, q, qp, da, xi: path.increments() }
    }

    fn finish(&self, mut pw: PathWeight, weight: f64) -> PathWeight {
        pw.weight = Some(weight);
        pw.contribution = match self.config.indicator {
            IndicatorForm::Ruin => weight,
            IndicatorForm::SurvivalNegated => -weight,
        };
        pw
    }

    /// Weight of one path in closed form.
    pub fn weight(&self, path: &SampledPath) -> Result<PathWeight> {
        let pw = self.screen(path)?;
        if !pw.indicator || pw.excluded {
            return Ok(pw);
        }
        let g = self.galerkin(path, &pw);
        let sigma = self.params.sigma;
        let s: f64 = g.q.iter().sum();
        let sp: f64 = g.qp.iter().sum();
        let e = self.chol.solve(&g.xi);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let head: f64 = g.q[..g.tau].iter().sum();
        let ss = sigma * s;
        let delta = g.m / ss * dot(&g.q, &e) - (head + g.m * dot(&g.da, &g.qp)) / ss
            + g.m * sp / (ss * s) * dot(&g.da, &g.q);
        Ok(self.finish(pw, delta))
    }

    /// Same weight through the dense integrand v and its Jacobian, passed to
    /// [`skorokhod_divergence`].
    pub fn weight_dense(&self, path: &SampledPath) -> Result<PathWeight> {
        let pw = self.screen(path)?;
        if !pw.indicator || pw.excluded {
            return Ok(pw);
        }
        let g = self.galerkin(path, &pw);
        let n = self.grid.steps();
        let sigma = self.params.sigma;
        let s: f64 = g.q.iter().sum();
        let sp: f64 = g.qp.iter().sum();
        let c = self.chol.solve(&g.q);
        let cp = self.chol.solve(&g.qp);
        let lead = g.m / (sigma * s);
        let v: Vec<f64> = c.iter().map(|x| lead * x).collect();
        let mut dv = vec![0.0; n * n];
        for k in 0..n {
            let dm = if k < g.tau { 1.0 } else { 0.0 };
            let dlead = dm / (sigma * s) - g.m * g.da[k] * sp / (sigma * s * s);
            for j in 0..n {
                dv[k * n + j] = dlead * c[j] + lead * g.da[k] * cp[j];
            }
        }
        let delta = skorokhod_divergence(&StepFunction::new(self.grid, v)?, &dv, path, self.params.h)?;
        Ok(self.finish(pw, delta))
    }
}

/// δ(v) for a cell-wise constant integrand v with Malliavin derivative
/// `dv[k·n + j]` = D_s v_t for s in cell k, t in cell j:
/// Σ_j v_j ξ_j − H(2H−1) ∫∫ D_s v_t |s−t|^{2H−2} ds dt.
pub fn skorokhod_divergence(v: &StepFunction, dv: &[f64], path: &SampledPath, h: f64) -> Result<f64> {
    v.grid().check_same(&path.grid)?;
    let n = path.grid.steps();
    if dv.len() != n * n {
        return Err(Error::Usage(format!("derivative matrix has {} entries, expected {}", dv.len(), n * n)));
    }
    check_h_above_half(h)?;
    let xi = path.increments();
    let riemann: f64 = v.cells().iter().zip(&xi).map(|(a, b)| a * b).sum();
    let gram = fgn_gram(n, h, path.grid.dt());
    let trace: f64 = dv.iter().zip(&gram).map(|(a, b)| a * b).sum();
    Ok(riemann - trace)
}

/// Closed-form weight for a single path.
pub fn malliavin_weight(path: &SampledPath, params: &ModelParams, config: &MalliavinConfig) -> Result<PathWeight> {
    WeightContext::new(path.grid, params, config)?.weight(path)
}

/// Dense reference weight for a single path.
pub fn malliavin_weight_dense(path: &SampledPath, params: &ModelParams, config: &MalliavinConfig) -> Result<PathWeight> {
    WeightContext::new(path.grid, params, config)?.weight_dense(path)
}

/// u_A from nodal values of ψ(Y).
pub fn u_a_path(psi_y: &GridFunction, h: f64, quad: &QuadratureConfig) -> Result<FlaggedGridFunction> {
    u_a_compact(psi_y, h, quad)
}

/// Diagnostic view of one path.
#[derive(Debug, Clone)]
pub struct MalliavinPathIntermediates {
    pub a_t: f64,
    pub y: GridFunction,
    pub psi_y: GridFunction,
    pub dy: DyMatrix,
    pub u_a: FlaggedGridFunction,
    pub m: f64,
    pub tau_idx: usize,
    pub denom: f64,
}

pub fn path_intermediates(
    path: &SampledPath,
    params: &ModelParams,
    config: &MalliavinConfig,
) -> Result<MalliavinPathIntermediates> {
    let ctx = WeightContext::new(path.grid, params, config)?;
    let pw = ctx.screen(path)?;
    let kappa = config.kappa();
    let y = GridFunction::from_fn(path.grid, |t| pw.a_t * t.powf(kappa))?;
    let psi_y = y.map(|_, v| ctx.moll.psi(v));
    let dy = dy_malliavin(path, params.theta, config)?;
    let u_a = u_a_path(&psi_y, params.h, &config.quad)?;
    Ok(MalliavinPathIntermediates { a_t: pw.a_t, y, psi_y, dy, u_a, m: pw.m, tau_idx: pw.tau, denom: pw.denom })
}

/// Estimate and per-path records.
#[derive(Debug, Clone)]
pub struct MalliavinRun {
    pub estimate: SensitivityEstimate,
    pub paths: Vec<PathWeight>,
}

/// Monte Carlo mean of the weighted indicator over paths 0..m.
#[allow(clippy::too_many_arguments)]
pub fn malliavin_sens_detailed(
    params: &ModelParams,
    horizon: f64,
    m: usize,
    n: usize,
    config: &MalliavinConfig,
    seed: u64,
    workers: Option<usize>,
) -> Result<MalliavinRun> {
    if m == 0 {
        return Err(Error::Usage("path count must be at least 1".into()));
    }
    let grid = TimeGrid::new(horizon, n)?;
    let ctx = WeightContext::new(grid, params, config)?;
    let sampler = FbmSampler::new(grid, params.h)?;
    let paths: Vec<PathWeight> = map_sampled_paths(&sampler, seed, m, workers, |p| ctx.weight(p))?
        .into_iter()
        .collect::<Result<_>>()?;
    let kept: Vec<f64> = paths.iter().filter(|p| !p.excluded).map(|p| p.contribution).collect();
    let excluded = m - kept.len();
    let events = paths.iter().filter(|p| p.indicator).count();
    let undominated = paths.iter().filter(|p| !p.dominated).count();
    let (value, se) = mean_se(&kept);
    let mut warnings = Vec::new();
    if excluded * 100 > m {
        warnings.push(format!("excluded paths exceed 1%: {excluded} of {m} had a vanishing weight denominator"));
    }
    if undominated > 0 {
        warnings.push(format!("dominating process fell below |W - theta t| on {undominated} of {m} paths"));
    }
    if events < 2 {
        warnings.push(format!("only {events} paths hit the indicator event; the standard error is unreliable"));
    }
    let mut method_params = BTreeMap::new();
    method_params.insert("r".into(), json!(config.r));
    method_params.insert("m_exp".into(), json!(config.m_exp));
    method_params.insert("sharpness".into(), json!(config.sharpness));
    method_params.insert("indicator".into(), json!(config.indicator));
    method_params.insert("quad_scheme".into(), json!(config.quad.scheme));
    method_params.insert("refinement".into(), json!(config.quad.refinement));
    method_params.insert("excluded_paths".into(), json!(excluded));
    method_params.insert("event_paths".into(), json!(events));
    method_params.insert("undominated_paths".into(), json!(undominated));
    let estimate = SensitivityEstimate {
        value,
        se,
        method: SensitivityMethod::Malliavin,
        m,
        n,
        seed,
        method_params,
        warnings,
    };
    Ok(MalliavinRun { estimate, paths })
}

pub fn malliavin_sens(
    params: &ModelParams,
    horizon: f64,
    m: usize,
    n: usize,
    config: &MalliavinConfig,
    seed: u64,
    workers: Option<usize>,
) -> Result<SensitivityEstimate> {
    Ok(malliavin_sens_detailed(params, horizon, m, n, config, seed, workers)?.estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraccalc::inner_product_h;
    use crate::ruin::{finite_diff_sens, FdScheme};

    fn params(sigma: f64) -> ModelParams {
        ModelParams::new(1.0, 1.0, sigma, 0.6).unwrap()
    }

    #[test]
    fn deterministic_integrand_telescopes() {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let path = FbmSampler::new(grid, 0.65).unwrap().sample(4, 1);
        let dv = vec![0.0; 32 * 32];
        for k in [1usize, 13, 32] {
            let v = StepFunction::indicator_to(grid, k);
            let d = skorokhod_divergence(&v, &dv, &path, 0.65).unwrap();
            assert!((d - path.w[k]).abs() < 1e-13);
        }
        assert!(skorokhod_divergence(&StepFunction::indicator_to(grid, 3), &dv[1..], &path, 0.65).is_err());
    }

    #[test]
    fn duality_with_point_evaluation() {
        // E[W_{T/2} δ(v)] = ⟨1_{[0,T/2]}, v⟩_H for deterministic v.
        let h = 0.7;
        let n = 32;
        let grid = TimeGrid::new(1.0, n).unwrap();
        let v = StepFunction::new(grid, (0..n).map(|j| (3.0 * grid.t(j)).cos()).collect()).unwrap();
        let dv = vec![0.0; n * n];
        let sampler = FbmSampler::new(grid, h).unwrap();
        let prods = map_sampled_paths(&sampler, 21, 10_000, None, |p| {
            p.w[n / 2] * skorokhod_divergence(&v, &dv, p, h).unwrap()
        })
        .unwrap();
        let (mean, se) = mean_se(&prods);
        let want = inner_product_h(&StepFunction::indicator_to(grid, n / 2), &v, h).unwrap();
        assert!((mean - want).abs() < 3.0 * se, "{mean} ± {se} vs {want}");
    }

    #[test]
    fn factor_out_identity() {
        // δ(Fv) = F δ(v) − ⟨DF, v⟩_H with F = W_{T/2}, D F = 1_{[0,T/2]}.
        let h = 0.6;
        let n = 40;
        let grid = TimeGrid::new(2.0, n).unwrap();
        let v = StepFunction::new(grid, (0..n).map(|j| 1.0 + grid.t(j)).collect()).unwrap();
        let zero = vec![0.0; n * n];
        let ind = StepFunction::indicator_to(grid, n / 2);
        let pairing = inner_product_h(&ind, &v, h).unwrap();
        let sampler = FbmSampler::new(grid, h).unwrap();
        for k in 0..5 {
            let path = sampler.sample(8, k);
            let f = path.w[n / 2];
            let fv = StepFunction::new(grid, v.cells().iter().map(|x| f * x).collect()).unwrap();
            let mut dfv = vec![0.0; n * n];
            for s in 0..n / 2 {
                for t in 0..n {
                    dfv[s * n + t] = v.cells()[t];
                }
            }
            let lhs = skorokhod_divergence(&fv, &dfv, &path, h).unwrap();
            let rhs = f * skorokhod_divergence(&v, &zero, &path, h).unwrap() - pairing;
            assert!((lhs - rhs).abs() < 1e-11 * (1.0 + lhs.abs()), "{lhs} {rhs}");
        }
    }

    #[test]
    fn closed_form_matches_dense_reference() {
        let p = ModelParams::new(0.6, 1.0, 1.0, 0.6).unwrap();
        let grid = TimeGrid::new(1.0, 48).unwrap();
        let cfg = MalliavinConfig::for_hurst(0.6);
        let ctx = WeightContext::new(grid, &p, &cfg).unwrap();
        let sampler = FbmSampler::new(grid, 0.6).unwrap();
        let mut checked = 0;
        for k in 0..400 {
            let path = sampler.sample(2, k);
            let a = ctx.weight(&path).unwrap();
            let b = ctx.weight_dense(&path).unwrap();
            assert_eq!(a.indicator, b.indicator);
            if let (Some(x), Some(y)) = (a.weight, b.weight) {
                assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()), "path {k}: {x} {y}");
                checked += 1;
            }
        }
        assert!(checked > 20, "{checked}");
    }

    #[test]
    fn non_event_paths_contribute_zero() {
        let p = params(0.5);
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let ctx = WeightContext::new(grid, &p, &MalliavinConfig::for_hurst(0.6)).unwrap();
        let sampler = FbmSampler::new(grid, 0.6).unwrap();
        for k in 0..50 {
            let w = ctx.weight(&sampler.sample(1, k)).unwrap();
            if !w.indicator {
                assert_eq!(w.contribution, 0.0);
                assert!(w.weight.is_none());
            }
        }
    }

    #[test]
    fn plateau_gives_full_denominator() {
        let p = ModelParams::new(1e6, 1.0, 0.5, 0.6).unwrap();
        let grid = TimeGrid::new(1.5, 32).unwrap();
        let path = FbmSampler::new(grid, 0.6).unwrap().sample(3, 0);
        let cfg = MalliavinConfig::for_hurst(0.6);
        let w = malliavin_weight(&path, &p, &cfg).unwrap();
        assert_eq!(w.denom, 0.5 * 1.5);
        let inter = path_intermediates(&path, &p, &cfg).unwrap();
        assert!(inter.psi_y.values().iter().all(|&v| v == 1.0));
        assert_eq!(inter.u_a.values().len(), 33);
    }

    #[test]
    fn psi_zero_path_has_zero_u_a() {
        // Y ≥ u/σ on every node but 0, so ψ(Y) vanishes except at t = 0.
        let p = ModelParams::new(1e-9, 1.0, 1.0, 0.7).unwrap();
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let path = FbmSampler::new(grid, 0.7).unwrap().sample(3, 0);
        let inter = path_intermediates(&path, &p, &MalliavinConfig::for_hurst(0.7)).unwrap();
        assert!(inter.psi_y.values()[1..].iter().all(|&v| v == 0.0));
        let zero = GridFunction::zeros(grid);
        let u = u_a_path(&zero, 0.7, &QuadratureConfig::default()).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn intermediates_satisfy_defining_identity() {
        // A far barrier moves the mollifier transition into the interior.
        let p = ModelParams::new(30.0, 1.0, 1.0, 0.6).unwrap();
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let sampler = FbmSampler::new(grid, 0.6).unwrap();
        let cfg = MalliavinConfig::for_hurst(0.6);
        let ctx = WeightContext::new(grid, &p, &cfg).unwrap();
        // pick a path whose ψ(Y) is not constant
        let path = (0..200)
            .map(|k| sampler.sample(6, k))
            .find(|pth| {
                let a = ctx.screen(pth).unwrap().a_t;
                let (ta, tb) = ctx.crossings(a);
                ta < 0.5 && tb > 0.6
            })
            .expect("a path with an interior transition");
        let inter = path_intermediates(&path, &p, &cfg).unwrap();
        let (q, _) = ctx.cell_integrals(inter.a_t);
        for k in [64usize, 128, 256] {
            let got = inner_product_h(&StepFunction::indicator_to(grid, k), &inter.u_a, 0.6).unwrap();
            let want: f64 = q[..k].iter().sum();
            assert!((got - want).abs() < 1e-2, "k {k}: {got} {want}");
        }
    }

    #[test]
    fn agrees_with_finite_differences() {
        let p = params(1.0);
        let cfg = MalliavinConfig::for_hurst(0.6);
        let mal = malliavin_sens(&p, 1.0, 20_000, 64, &cfg, 17, None).unwrap();
        let fd = finite_diff_sens(&p, 1.0, 0.01, FdScheme::Central, true, 200_000, 64, 18, None).unwrap();
        let tol = 3.0 * (mal.se.powi(2) + fd.se.powi(2)).sqrt();
        assert!((mal.value - fd.value).abs() < tol, "{} ± {} vs {} ± {}", mal.value, mal.se, fd.value, fd.se);
        assert_eq!(mal.method_params["excluded_paths"], json!(0));
        assert_eq!(mal.method_params["undominated_paths"], json!(0));
    }

    #[test]
    fn indicator_forms_agree() {
        let p = params(1.0);
        let ruin = MalliavinConfig::for_hurst(0.6);
        let surv = MalliavinConfig { indicator: IndicatorForm::SurvivalNegated, ..ruin };
        let a = malliavin_sens(&p, 1.0, 4000, 32, &ruin, 5, None).unwrap();
        let b = malliavin_sens(&p, 1.0, 4000, 32, &surv, 5, None).unwrap();
        // Same paths: the two forms differ by the sample mean of the weights.
        let tol = 3.0 * (a.se.powi(2) + b.se.powi(2)).sqrt();
        assert!((a.value - b.value).abs() < tol);
    }

    #[test]
    fn far_barrier_gives_near_zero() {
        let p = ModelParams::new(6.0, 1.0, 0.5, 0.6).unwrap();
        let est = malliavin_sens(&p, 1.0, 2000, 32, &MalliavinConfig::for_hurst(0.6), 3, None).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(est.warnings.iter().any(|w| w.contains("indicator event")));
    }

    #[test]
    fn independent_of_worker_count() {
        let p = params(1.0);
        let cfg = MalliavinConfig::for_hurst(0.6);
        let a = malliavin_sens(&p, 1.0, 301, 32, &cfg, 9, Some(1)).unwrap();
        let b = malliavin_sens(&p, 1.0, 301, 32, &cfg, 9, Some(3)).unwrap();
        assert_eq!(a, b);
    }
}
