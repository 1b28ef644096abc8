use rayon::prelude::*;

use super::kernel::{c_h_const, d_h_const};
use super::riemann::marchaud_left_at;
use super::{check_h_above_half, QuadScheme, QuadratureConfig};
use crate::error::{Error, Result};
use crate::grid::{FlaggedGridFunction, GridFunction, TimeGrid};
use crate::quadrature::GaussLegendre;
use crate::special::{beta_fn, gamma_fn};

/// Cell-wise Gauss–Legendre over grid cells, with power-law endpoint
/// singularities removed by substitution.
struct CellQuad {
    near: GaussLegendre,
    far: GaussLegendre,
    panels: usize,
}

impl CellQuad {
    fn new(quad: &QuadratureConfig) -> Self {
        Self { near: GaussLegendre::new(16), far: GaussLegendre::new(8), panels: quad.refinement }
    }

    /// ∫_lo^hi f, split at grid nodes. `left`/`right` give exponents a with
    /// f ~ |y − end|^{−a} at that end.
    fn integrate(
        &self,
        lo: f64,
        hi: f64,
        dt: f64,
        left: Option<f64>,
        right: Option<f64>,
        f: impl Fn(f64) -> f64,
    ) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let tol = 1e-9 * dt;
        let mut cuts = vec![lo];
        let mut k = (lo / dt).floor() as i64 + 1;
        while (k as f64) * dt < hi - tol {
            let y = k as f64 * dt;
            if y > lo + tol {
                cuts.push(y);
            }
            k += 1;
        }
        cuts.push(hi);
        if cuts.len() == 2 && left.is_some() && right.is_some() {
            cuts.insert(1, 0.5 * (lo + hi));
        }
        let last = cuts.len() - 2;
        let mut acc = 0.0;
        for j in 0..=last {
            let (a, b) = (cuts[j], cuts[j + 1]);
            acc += match (j, left, right) {
                (0, Some(e), _) => self.substituted(a, b - a, e, &f),
                (j, _, Some(e)) if j == last => self.substituted(b, a - b, e, &f),
                (j, _, _) if j == 1 || j + 1 == last => self.near.integrate(a, b, &f),
                _ => self.far.integrate(a, b, &f),
            };
        }
        acc
    }

    /// ∫ over the cell from `end` to `end + len` (len may be negative) of f,
    /// via y = end + len·v^{1/(1−e)}.
    fn substituted(&self, end: f64, len: f64, e: f64, f: &impl Fn(f64) -> f64) -> f64 {
        let p = 1.0 / (1.0 - e);
        let scale = len.abs() * p;
        // Panels graded towards v = 0, where terms like s^α leave a mild
        // algebraic singularity after the substitution.
        let g = |v: f64| f(end + len * v.powf(p)) * scale * v.powf(p - 1.0);
        let mut hi = 1.0;
        let mut acc = 0.0;
        for _ in 0..self.panels {
            let lo = 0.25 * hi;
            acc += self.near.integrate(lo, hi, g);
            hi = lo;
        }
        acc + self.near.integrate(0.0, hi, g)
    }
}

/// Evaluation point of node i: flagged boundary nodes use the adjacent half node.
fn eval_point(grid: &TimeGrid, i: usize, flagged: &[usize]) -> f64 {
    if flagged.contains(&i) {
        if i == 0 {
            return 0.5 * grid.dt();
        }
        if i == grid.steps() {
            return grid.horizon() - 0.5 * grid.dt();
        }
    }
    grid.t(i)
}

/// d_H t^{H−1/2} D^{H−1/2}_{0+}(s^{1/2−H} ψ(s))(t) at every node; node 0 is
/// flagged.
pub fn k_star_adj_inv(
    psi: &GridFunction,
    h: f64,
    quad: &QuadratureConfig,
) -> Result<FlaggedGridFunction> {
    check_h_above_half(h)?;
    quad.validate()?;
    let alpha = h - 0.5;
    let d_h = d_h_const(h)?;
    let grid = *psi.grid();
    let dt = grid.dt();
    let flagged = vec![0];
    let points: Vec<f64> = (0..=grid.steps()).map(|i| eval_point(&grid, i, &flagged)).collect();
    let values: Vec<f64> = match quad.scheme {
        QuadScheme::SingularitySubstituted => {
            // Split s^{−α}ψ(s) increments into ψ(x)(x^{−α} − s^{−α}), which has a
            // closed-form derivative, and s^{−α}(ψ(x) − ψ(s)).
            let power = gamma_fn(1.0 - alpha)? / gamma_fn(1.0 - 2.0 * alpha)?;
            let coef = alpha / gamma_fn(1.0 - alpha)?;
            let cq = CellQuad::new(quad);
            points
                .par_iter()
                .map(|&x| {
                    let px = psi.eval(x);
                    let integral = cq.integrate(0.0, x, dt, Some(alpha), Some(alpha), |y| {
                        y.powf(-alpha) * (px - psi.eval(y)) * (x - y).powf(-alpha - 1.0)
                    });
                    d_h * (px * power * x.powf(-alpha) + coef * x.powf(alpha) * integral)
                })
                .collect()
        }
        QuadScheme::ProductRule => {
            // Node 0 of s^{−α} takes the value that keeps the cell integral exact.
            let mut g: Vec<f64> = grid.times().iter().zip(psi.values()).map(|(&t, &p)| t.powf(-alpha) * p).collect();
            g[0] = dt.powf(-alpha) * (1.0 + alpha) / (1.0 - alpha) * psi.values()[0];
            points
                .par_iter()
                .map(|&x| d_h * x.powf(alpha) * marchaud_left_at(&g, dt, x, alpha))
                .collect()
        }
    };
    Ok(FlaggedGridFunction { function: GridFunction::new(grid, values)?, flagged })
}

/// t^{1/2−H} D^{H−1/2}_{T−}(s^{H−1/2} w(s))(t) / (c_H Γ(H−1/2)) at every node;
/// nodes 0 and n are flagged.
pub fn k_star_inv(w: &FlaggedGridFunction, h: f64) -> Result<FlaggedGridFunction> {
    check_h_above_half(h)?;
    let alpha = h - 0.5;
    let grid = *w.grid();
    let n = grid.steps();
    let horizon = grid.horizon();
    let dt = grid.dt();
    let scale = 1.0 / (c_h_const(h)? * gamma_fn(alpha)?);
    let rev_h: Vec<f64> = (0..=n)
        .rev()
        .map(|i| eval_point(&grid, i, &w.flagged).powf(alpha) * w.values()[i])
        .collect();
    let flagged = vec![0, n];
    let values: Vec<f64> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let t = eval_point(&grid, i, &flagged);
            scale * t.powf(-alpha) * marchaud_left_at(&rev_h, dt, horizon - t, alpha)
        })
        .collect();
    Ok(FlaggedGridFunction { function: GridFunction::new(grid, values)?, flagged })
}

/// u_A as the composition of the two inverse operators.
pub fn u_a_compact(psi: &GridFunction, h: f64, quad: &QuadratureConfig) -> Result<FlaggedGridFunction> {
    k_star_inv(&k_star_adj_inv(psi, h, quad)?, h)
}

/// u_A from the expanded double-integral form, every singular integral
/// evaluated by substituted Gauss–Legendre.
pub fn u_a_expanded(psi: &GridFunction, h: f64, quad: &QuadratureConfig) -> Result<FlaggedGridFunction> {
    check_h_above_half(h)?;
    quad.validate()?;
    let alpha = h - 0.5;
    let grid = *psi.grid();
    let n = grid.steps();
    let dt = grid.dt();
    let horizon = grid.horizon();
    let prefactor =
        d_h_const(h)? / (c_h_const(h)? * beta_fn(alpha, 1.0 - alpha)? * gamma_fn(1.0 - alpha)?);
    let cq = CellQuad::new(quad);

    // F(t) = ψ(t) + α t^{2α} ∫_0^t (t^{−α}ψ(t) − s^{−α}ψ(s)) / (t−s)^{α+1} ds
    let inner_flags = vec![0];
    let f_vals: Vec<f64> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let t = eval_point(&grid, i, &inner_flags);
            let gt = t.powf(-alpha) * psi.eval(t);
            let j = cq.integrate(0.0, t, dt, Some(alpha), Some(alpha), |s| {
                (gt - s.powf(-alpha) * psi.eval(s)) * (t - s).powf(-alpha - 1.0)
            });
            psi.eval(t) + alpha * t.powf(2.0 * alpha) * j
        })
        .collect();
    let f = GridFunction::new(grid, f_vals)?;

    let flagged = vec![0, n];
    let values: Vec<f64> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let t = eval_point(&grid, i, &flagged);
            let ft = f.eval(t);
            let tail = cq.integrate(t, horizon, dt, Some(alpha), None, |s| {
                (ft - f.eval(s)) * (s - t).powf(-alpha - 1.0)
            });
            prefactor * t.powf(-alpha) * (ft * (horizon - t).powf(-alpha) + alpha * tail)
        })
        .collect();
    Ok(FlaggedGridFunction { function: GridFunction::new(grid, values)?, flagged })
}

/// Closed form of u_A when ψ ≡ 1: d_H² / Γ(2−2H) · t^{1/2−H} (T−t)^{1/2−H}.
pub fn u_a_constant_psi(grid: TimeGrid, h: f64) -> Result<FlaggedGridFunction> {
    check_h_above_half(h)?;
    let alpha = h - 0.5;
    let c = d_h_const(h)?.powi(2) / gamma_fn(2.0 - 2.0 * h)?;
    let n = grid.steps();
    let flagged = vec![0, n];
    let values = (0..=n)
        .map(|i| {
            let t = eval_point(&grid, i, &flagged);
            c * t.powf(-alpha) * (grid.horizon() - t).powf(-alpha)
        })
        .collect();
    if !(c.is_finite()) {
        return Err(Error::Numerical("u_A constant overflow".into()));
    }
    Ok(FlaggedGridFunction { function: GridFunction::new(grid, values)?, flagged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraccalc::inner_product_h;
    use crate::grid::StepFunction;
    use proptest::prelude::*;

    fn psi_smooth(grid: TimeGrid) -> GridFunction {
        GridFunction::from_fn(grid, |t| 1.0 / (1.0 + 2.0 * t * t)).unwrap()
    }

    #[test]
    fn zero_maps_to_zero() {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let z = GridFunction::zeros(grid);
        for scheme in [QuadScheme::SingularitySubstituted, QuadScheme::ProductRule] {
            let q = QuadratureConfig { scheme, refinement: 4 };
            assert!(u_a_compact(&z, 0.7, &q).unwrap().values().iter().all(|&v| v == 0.0));
        }
        assert!(u_a_expanded(&z, 0.7, &QuadratureConfig::default()).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_psi_power_rule() {
        let h = 0.65;
        let alpha = h - 0.5;
        let grid = TimeGrid::new(2.0, 64).unwrap();
        let one = GridFunction::from_fn(grid, |_| 1.0).unwrap();
        let w = k_star_adj_inv(&one, h, &QuadratureConfig::default()).unwrap();
        // D^α s^{−α} = Γ(1−α)/Γ(1−2α) t^{−2α}
        let c = d_h_const(h).unwrap() * gamma_fn(1.0 - alpha).unwrap() / gamma_fn(1.0 - 2.0 * alpha).unwrap();
        for i in 1..=64 {
            let want = c * grid.t(i).powf(-alpha);
            assert!((w.values()[i] - want).abs() < 1e-12 * want);
        }
        let exact = u_a_constant_psi(grid, h).unwrap();
        let compact = u_a_compact(&one, h, &QuadratureConfig::default()).unwrap();
        let expanded = u_a_expanded(&one, h, &QuadratureConfig::default()).unwrap();
        for i in 0..=64 {
            let e = exact.values()[i];
            assert!((compact.values()[i] - e).abs() < 1e-10 * e, "{i} {} {e}", compact.values()[i]);
            assert!((expanded.values()[i] - e).abs() < 1e-8 * e, "{i} {} {e}", expanded.values()[i]);
        }
    }

    #[test]
    fn compact_and_expanded_agree() {
        for &h in &[0.6, 0.75] {
            let grid = TimeGrid::new(1.0, 64).unwrap();
            let psi = psi_smooth(grid);
            let a = u_a_compact(&psi, h, &QuadratureConfig::default()).unwrap();
            let b = u_a_expanded(&psi, h, &QuadratureConfig::default()).unwrap();
            for i in 0..=64 {
                let (x, y) = (a.values()[i], b.values()[i]);
                assert!((x - y).abs() < 1e-8 * x.abs().max(1.0), "h {h} node {i}: {x} {y}");
            }
        }
    }

    #[test]
    fn product_rule_scheme_is_close() {
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let psi = psi_smooth(grid);
        let h = 0.7;
        let a = k_star_adj_inv(&psi, h, &QuadratureConfig::default()).unwrap();
        let b = k_star_adj_inv(&psi, h, &QuadratureConfig { scheme: QuadScheme::ProductRule, refinement: 8 }).unwrap();
        let worst = (8..=256).map(|i| ((a.values()[i] - b.values()[i]) / a.values()[i]).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-2, "{worst}");
    }

    fn identity_error(n: usize, h: f64) -> f64 {
        let grid = TimeGrid::new(1.0, n).unwrap();
        let psi = psi_smooth(grid);
        let u = u_a_compact(&psi, h, &QuadratureConfig::default()).unwrap();
        let mut worst: f64 = 0.0;
        for k in [n / 4, n / 2, n] {
            let got = inner_product_h(&StepFunction::indicator_to(grid, k), &u, h).unwrap();
            let s = grid.t(k);
            // ∫_0^s 1/(1+2t²) dt
            let want = (2f64.sqrt() * s).atan() / 2f64.sqrt();
            worst = worst.max((got - want).abs());
        }
        worst
    }

    #[test]
    fn defining_identity_improves_with_refinement() {
        for &h in &[0.6, 0.7] {
            let e9 = identity_error(512, h);
            let e10 = identity_error(1024, h);
            assert!(e9 < 1e-2, "h {h}: {e9}");
            assert!(e10 < e9, "h {h}: {e9} -> {e10}");
        }
    }

    #[test]
    fn domain_errors() {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let one = GridFunction::from_fn(grid, |_| 1.0).unwrap();
        assert!(k_star_adj_inv(&one, 0.5, &QuadratureConfig::default()).is_err());
        assert!(u_a_constant_psi(grid, 1.0).is_err());
        let bad = QuadratureConfig { refinement: 0, ..Default::default() };
        assert!(matches!(u_a_expanded(&one, 0.7, &bad), Err(Error::Config(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn linear(a in proptest::collection::vec(-1.0f64..1.0, 17), b in proptest::collection::vec(-1.0f64..1.0, 17), c in -2.0f64..2.0) {
            let grid = TimeGrid::new(1.0, 16).unwrap();
            let q = QuadratureConfig::default();
            let fa = GridFunction::new(grid, a.clone()).unwrap();
            let fb = GridFunction::new(grid, b.clone()).unwrap();
            let mix = GridFunction::new(grid, a.iter().zip(&b).map(|(x, y)| c * x + y).collect()).unwrap();
            let (ua, ub, um) = (u_a_compact(&fa, 0.7, &q).unwrap(), u_a_compact(&fb, 0.7, &q).unwrap(), u_a_compact(&mix, 0.7, &q).unwrap());
            for i in 0..=16 {
                let want = c * ua.values()[i] + ub.values()[i];
                prop_assert!((um.values()[i] - want).abs() < 1e-10 * (1.0 + want.abs()));
            }
        }
    }
}
