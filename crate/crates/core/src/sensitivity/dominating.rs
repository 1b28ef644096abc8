use super::MalliavinConfig;
use crate::error::{Error, Result};
use crate::fbm::SampledPath;
use crate::grid::GridFunction;

/// Y_t = A_T t^{m/r} with A_T = 8(4J)^{1/r}(m+2)/m.
#[derive(Debug, Clone, PartialEq)]
pub struct YProcess {
    pub j: f64,
    pub a_t: f64,
    pub kappa: f64,
    pub y: GridFunction,
}

/// D_s Y_t on the grid: row l is s in cell l, column i is node t_i.
#[derive(Debug, Clone, PartialEq)]
pub struct DyMatrix {
    pub cells: usize,
    pub nodes: usize,
    pub values: Vec<f64>,
    /// J = 0: the derivative is set to zero.
    pub degenerate: bool,
}

impl DyMatrix {
    pub fn get(&self, cell: usize, node: usize) -> f64 {
        self.values[cell * self.nodes + node]
    }
}

/// Trapezoid double sum for J = ∫∫ |Z_s − Z_u|^r / |s−u|^{m+2} ds du over
/// nodes, with zero on the diagonal where the integrand vanishes when rH > m+2.
///
/// With `grad`, also returns ∂J/∂ξ_l for each increment ξ_l of Z.
pub fn grr_integral(z: &[f64], dt: f64, r: u32, m_exp: u32, grad: bool) -> (f64, Option<Vec<f64>>) {
    let len = z.len();
    let n = len - 1;
    let wq = |i: usize| if i == 0 || i == n { 0.5 * dt } else { dt };
    let inv_dist: Vec<f64> = (0..len).map(|d| if d == 0 { 0.0 } else { (d as f64 * dt).powi(-((m_exp + 2) as i32)) }).collect();
    let rf = f64::from(r);
    let rm1 = (r - 1) as i32;
    let mut j = 0.0;
    let mut g = if grad { vec![0.0; len] } else { Vec::new() };
    for a in 0..len {
        let wa = wq(a);
        let za = z[a];
        let mut row = 0.0;
        for b in a + 1..len {
            let d = za - z[b];
            let term = wa * wq(b) * inv_dist[b - a];
            let pw = d.powi(rm1);
            row += term * pw * d;
            if grad {
                let gt = term * rf * pw;
                g[a] += gt;
                g[b] -= gt;
            }
        }
        j += 2.0 * row;
    }
    if !grad {
        return (j, None);
    }
    // ∂J/∂ξ_l = 2 Σ_{i>l} G_i with G_i = Σ_j w_i w_j r (Z_i−Z_j)^{r−1} / |t_i−t_j|^{m+2}.
    let mut out = vec![0.0; n];
    let mut suffix = 0.0;
    for l in (0..n).rev() {
        suffix += g[l + 1];
        out[l] = 2.0 * suffix;
    }
    (j, Some(out))
}

fn drifted(path: &SampledPath, theta: f64) -> Vec<f64> {
    path.w.iter().enumerate().map(|(i, w)| w - theta * path.grid.t(i)).collect()
}

pub(crate) fn a_from_j(j: f64, config: &MalliavinConfig) -> f64 {
    let m = f64::from(config.m_exp);
    8.0 * (4.0 * j).powf(1.0 / f64::from(config.r)) * (m + 2.0) / m
}

/// The dominating process Y of the path Z = W − θt.
pub fn y_process(path: &SampledPath, theta: f64, config: &MalliavinConfig) -> Result<YProcess> {
    config.validate(path.h)?;
    let z = drifted(path, theta);
    let (j, _) = grr_integral(&z, path.grid.dt(), config.r, config.m_exp, false);
    let a_t = a_from_j(j, config);
    let kappa = config.kappa();
    let y = GridFunction::from_fn(path.grid, |t| a_t * t.powf(kappa))?;
    Ok(YProcess { j, a_t, kappa, y })
}

/// D_s Y_t = t^{m/r} ∂A_T/∂ξ_l for s in cell l, via ∂A_T = A_T ∂J / (rJ).
pub fn dy_malliavin(path: &SampledPath, theta: f64, config: &MalliavinConfig) -> Result<DyMatrix> {
    config.validate(path.h)?;
    let z = drifted(path, theta);
    let grid = path.grid;
    let (j, dj) = grr_integral(&z, grid.dt(), config.r, config.m_exp, true);
    let cells = grid.steps();
    let nodes = grid.len();
    if !(j > 0.0) {
        return Ok(DyMatrix { cells, nodes, values: vec![0.0; cells * nodes], degenerate: true });
    }
    if !j.is_finite() {
        return Err(Error::Numerical("dominating integral overflowed".into()));
    }
    let a_t = a_from_j(j, config);
    let kappa = config.kappa();
    let dj = dj.expect("gradient requested");
    let tk: Vec<f64> = grid.times().iter().map(|t| t.powf(kappa)).collect();
    let mut values = vec![0.0; cells * nodes];
    for (l, d) in dj.iter().enumerate() {
        let da = a_t * d / (f64::from(config.r) * j);
        for (i, t) in tk.iter().enumerate() {
            values[l * nodes + i] = da * t;
        }
    }
    Ok(DyMatrix { cells, nodes, values, degenerate: false })
}
