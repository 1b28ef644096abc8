use super::{check_alpha, Side};
use crate::error::Result;
use crate::grid::{FlaggedGridFunction, GridFunction};
use crate::special::gamma_fn;

/// Riemann–Liouville integral I^α of `f` at every node.
///
/// Product integration: the weight (t−y)^{α−1} is integrated exactly
/// against the piecewise-linear interpolant of `f`.
pub fn frac_integral(f: &GridFunction, alpha: f64, side: Side) -> Result<GridFunction> {
    check_alpha(alpha)?;
    let vals = f.values();
    let out = match side {
        Side::Left => integral_left(vals, f.grid().dt(), alpha),
        Side::Right => {
            let rev: Vec<f64> = vals.iter().rev().copied().collect();
            let mut r = integral_left(&rev, f.grid().dt(), alpha);
            r.reverse();
            r
        }
    };
    GridFunction::new(*f.grid(), out)
}

fn integral_left(f: &[f64], dt: f64, alpha: f64) -> Vec<f64> {
    let n = f.len() - 1;
    let c = dt.powf(alpha) / gamma_fn(alpha + 2.0).expect("alpha + 2 > 0");
    let a1 = alpha + 1.0;
    // b[d] = d^{α+1}
    let b: Vec<f64> = (0..=n + 1).map(|d| (d as f64).powf(a1)).collect();
    let mut out = vec![0.0; n + 1];
    for i in 1..=n {
        let fi = i as f64;
        let mut s = (b[i - 1] - (fi - alpha - 1.0) * fi.powf(alpha)) * f[0];
        for (j, fj) in f.iter().enumerate().take(i).skip(1) {
            let d = i - j;
            s += (b[d + 1] - 2.0 * b[d] + b[d - 1]) * fj;
        }
        s += f[i];
        out[i] = c * s;
    }
    out
}

/// Marchaud-form left derivative of the piecewise-linear interpolant of
/// node values `g` (spacing `dt`) at a point `x` in (0, T]:
///
/// D^α g(x) = [g(x) x^{−α} + α ∫_0^x (g(x) − g(y)) (x−y)^{−α−1} dy] / Γ(1−α).
pub fn marchaud_left_at(g: &[f64], dt: f64, x: f64, alpha: f64) -> f64 {
    let n = g.len() - 1;
    let pos = x / dt;
    let mut j = pos.floor() as usize;
    let mut ell = x - j as f64 * dt;
    if ell < 1e-12 * dt {
        ell = 0.0;
    }
    if j >= n {
        j = n;
        ell = 0.0;
    }
    let gx = if ell > 0.0 { g[j] + (g[j + 1] - g[j]) * ell / dt } else { g[j] };
    let one_minus = 1.0 - alpha;
    let mut acc = 0.0;
    if ell > 0.0 {
        let s = (g[j + 1] - g[j]) / dt;
        acc += alpha * s * ell.powf(one_minus) / one_minus;
    }
    for k in 0..j {
        let s = (g[k + 1] - g[k]) / dt;
        let z0 = x - k as f64 * dt;
        let z1 = x - (k + 1) as f64 * dt;
        if k + 1 == j && ell == 0.0 {
            acc += alpha * s * z0.powf(one_minus) / one_minus;
        } else {
            let d = gx - g[k] - s * z0;
            acc += d * (z1.powf(-alpha) - z0.powf(-alpha))
                + alpha * s * (z0.powf(one_minus) - z1.powf(one_minus)) / one_minus;
        }
    }
    (gx * x.powf(-alpha) + acc) / gamma_fn(one_minus).expect("1 - alpha > 0")
}

/// Marchaud derivative D^α at every node.
///
/// The boundary node (0 for the left side, T for the right) is flagged and
/// holds the value at the adjacent half node.
pub fn frac_derivative(g: &GridFunction, alpha: f64, side: Side) -> Result<FlaggedGridFunction> {
    check_alpha(alpha)?;
    let grid = *g.grid();
    let dt = grid.dt();
    let n = grid.steps();
    let vals: Vec<f64> = match side {
        Side::Left => g.values().to_vec(),
        Side::Right => g.values().iter().rev().copied().collect(),
    };
    let mut out: Vec<f64> = (0..=n)
        .map(|i| {
            let x = if i == 0 { 0.5 * dt } else { grid.t(i) };
            marchaud_left_at(&vals, dt, x, alpha)
        })
        .collect();
    let flagged = match side {
        Side::Left => vec![0],
        Side::Right => {
            out.reverse();
            vec![n]
        }
    };
    Ok(FlaggedGridFunction { function: GridFunction::new(grid, out)?, flagged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use proptest::prelude::*;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn integral_of_constant() {
        for &alpha in &[0.1, 0.5, 0.9] {
            let f = GridFunction::from_fn(grid(50), |_| 1.0).unwrap();
            let left = frac_integral(&f, alpha, Side::Left).unwrap();
            let right = frac_integral(&f, alpha, Side::Right).unwrap();
            let g = gamma_fn(alpha + 1.0).unwrap();
            for (i, t) in grid(50).times().into_iter().enumerate() {
                assert!((left.values()[i] - t.powf(alpha) / g).abs() < 1e-13);
                assert!((right.values()[i] - (1.0 - t).powf(alpha) / g).abs() < 1e-13);
            }
        }
        assert!(frac_integral(&GridFunction::zeros(grid(4)), 1.0, Side::Left).is_err());
    }

    #[test]
    fn integral_of_identity_is_exact() {
        let f = GridFunction::from_fn(grid(40), |t| t).unwrap();
        let r = frac_integral(&f, 0.5, Side::Left).unwrap();
        for (i, t) in grid(40).times().into_iter().enumerate() {
            assert!((r.values()[i] - t.powf(1.5) / gamma_fn(2.5).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_of_constant() {
        let g = GridFunction::from_fn(grid(32), |_| 1.0).unwrap();
        let alpha = 0.3;
        let d = frac_derivative(&g, alpha, Side::Left).unwrap();
        assert_eq!(d.flagged, vec![0]);
        let gm = gamma_fn(1.0 - alpha).unwrap();
        for i in 1..=32 {
            let x = i as f64 / 32.0;
            assert!((d.values()[i] - x.powf(-alpha) / gm).abs() < 1e-13);
        }
        assert!((d.values()[0] - (1.0f64 / 64.0).powf(-alpha) / gm).abs() < 1e-12);
        let r = frac_derivative(&g, alpha, Side::Right).unwrap();
        assert_eq!(r.flagged, vec![32]);
        assert!((r.values()[8] - 0.75f64.powf(-alpha) / gm).abs() < 1e-13);
    }

    #[test]
    fn derivative_power_rule() {
        let alpha = 0.25;
        let mu = 1.5;
        let want = |x: f64| gamma_fn(mu + 1.0).unwrap() / gamma_fn(mu + 1.0 - alpha).unwrap() * x.powf(mu - alpha);
        let mut prev = f64::INFINITY;
        for &n in &[64usize, 128, 256] {
            let g = GridFunction::from_fn(grid(n), |t| t.powf(mu)).unwrap();
            let d = frac_derivative(&g, alpha, Side::Left).unwrap();
            let err = (1..=n)
                .map(|i| (d.values()[i] - want(i as f64 / n as f64)).abs())
                .fold(0.0, f64::max);
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-3, "{prev}");
    }

    #[test]
    fn derivative_inverts_integral() {
        // Smooth f with f(0) = 0; the sup error over nodes shrinks under refinement.
        let f = |t: f64| (3.0 * t).sin() + t * t;
        let alpha = 0.35;
        let mut errs = Vec::new();
        for &n in &[256usize, 512, 1024] {
            let fg = GridFunction::from_fn(grid(n), f).unwrap();
            let i = frac_integral(&fg, alpha, Side::Left).unwrap();
            let d = frac_derivative(&i, alpha, Side::Left).unwrap();
            let e = (1..=n).map(|k| (d.values()[k] - fg.values()[k]).abs()).fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[2] < 1e-3, "{errs:?}");
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order >= 0.5, "{errs:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn operators_are_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, alpha in 0.05f64..0.95, seed in 0u64..100) {
            let g = grid(24);
            let f1 = GridFunction::from_fn(g, |t| (t * (seed as f64 + 1.0)).sin()).unwrap();
            let f2 = GridFunction::from_fn(g, |t| (t + 0.1 * seed as f64).cos()).unwrap();
            let comb = GridFunction::new(g, f1.values().iter().zip(f2.values()).map(|(x, y)| a * x + b * y).collect()).unwrap();
            for side in [Side::Left, Side::Right] {
                let i1 = frac_integral(&f1, alpha, side).unwrap();
                let i2 = frac_integral(&f2, alpha, side).unwrap();
                let ic = frac_integral(&comb, alpha, side).unwrap();
                let d1 = frac_derivative(&f1, alpha, side).unwrap();
                let d2 = frac_derivative(&f2, alpha, side).unwrap();
                let dc = frac_derivative(&comb, alpha, side).unwrap();
                for k in 0..=24 {
                    let scale = 1.0 + a.abs() + b.abs();
                    prop_assert!((ic.values()[k] - a * i1.values()[k] - b * i2.values()[k]).abs() < 1e-12 * scale);
                    let ds = scale * (1.0 + dc.values()[k].abs());
                    prop_assert!((dc.values()[k] - a * d1.values()[k] - b * d2.values()[k]).abs() < 1e-11 * ds);
                }
            }
        }
    }
}
