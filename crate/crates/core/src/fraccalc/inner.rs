use crate::error::{Error, Result};
use crate::grid::{FlaggedGridFunction, GridFunction, StepFunction, TimeGrid};
use crate::quadrature::GaussLegendre;
use crate::special::rho_h;

/// Anything with a per-cell representation c0 + c1·(x − t_k)/Δ on cell k.
pub trait HElement {
    fn grid(&self) -> &TimeGrid;
    /// Constant parts, and linear parts when the function is not a step function.
    fn cell_coefficients(&self) -> (Vec<f64>, Option<Vec<f64>>);
}

impl HElement for GridFunction {
    fn grid(&self) -> &TimeGrid {
        GridFunction::grid(self)
    }
    fn cell_coefficients(&self) -> (Vec<f64>, Option<Vec<f64>>) {
        let v = self.values();
        let c0 = v[..v.len() - 1].to_vec();
        let c1 = v.windows(2).map(|w| w[1] - w[0]).collect();
        (c0, Some(c1))
    }
}

impl HElement for FlaggedGridFunction {
    fn grid(&self) -> &TimeGrid {
        self.function.grid()
    }
    fn cell_coefficients(&self) -> (Vec<f64>, Option<Vec<f64>>) {
        self.function.cell_coefficients()
    }
}

impl HElement for StepFunction {
    fn grid(&self) -> &TimeGrid {
        StepFunction::grid(self)
    }
    fn cell_coefficients(&self) -> (Vec<f64>, Option<Vec<f64>>) {
        (self.cells().to_vec(), None)
    }
}

/// Integrals of the kernel H(2H−1)|r−u|^{2H−2} against the local bases
/// {1, x} on two unit cells `d` apart, scaled by Δ^{2H}.
#[derive(Debug, Clone)]
pub struct CellWeights {
    n: usize,
    w00: Vec<f64>,
    w10: Vec<f64>,
    w11: Vec<f64>,
}

impl CellWeights {
    pub fn new(n: usize, h: f64, dt: f64) -> Self {
        let scale = dt.powf(2.0 * h);
        let len = 2 * n - 1;
        let mut w00 = vec![0.0; len];
        let mut w10 = vec![0.0; len];
        let mut w11 = vec![0.0; len];
        for idx in 0..len {
            let d = idx as i64 - (n as i64 - 1);
            let (a, b, c) = unit_cell_weights(d, h);
            w00[idx] = a * scale;
            w10[idx] = b * scale;
            w11[idx] = c * scale;
        }
        Self { n, w00, w10, w11 }
    }

    #[inline]
    fn idx(&self, d: i64) -> usize {
        (d + self.n as i64 - 1) as usize
    }

    /// ∫∫ over cells k, l of the kernel, d = k − l.
    pub fn w00(&self, d: i64) -> f64 {
        self.w00[self.idx(d)]
    }

    /// Weight of the linear basis on cell k against the constant on cell l.
    pub fn w10(&self, d: i64) -> f64 {
        self.w10[self.idx(d)]
    }

    pub fn w01(&self, d: i64) -> f64 {
        self.w10[self.idx(-d)]
    }

    pub fn w11(&self, d: i64) -> f64 {
        self.w11[self.idx(d)]
    }
}

/// (I00, I10, I11) at integer offset d for unit cells.
fn unit_cell_weights(d: i64, h: f64) -> (f64, f64, f64) {
    if d.abs() <= 2 {
        closed_form_weights(d as f64, h)
    } else {
        // Far from the diagonal the closed forms cancel badly; the kernel is
        // analytic there and tensor Gauss–Legendre is accurate to roundoff.
        quadrature_weights(d as f64, h)
    }
}

fn closed_form_weights(d: f64, h: f64) -> (f64, f64, f64) {
    let e = 2.0 * h;
    let k2 = |z: f64| 0.5 * z.abs().powf(e);
    let k3 = |z: f64| 0.5 * z.signum() * z.abs().powf(e + 1.0) / (e + 1.0);
    let k4 = |z: f64| 0.5 * z.abs().powf(e + 2.0) / ((e + 1.0) * (e + 2.0));
    let i00 = k2(d + 1.0) - 2.0 * k2(d) + k2(d - 1.0);
    let i10 = k2(d + 1.0) - k2(d) - k3(d + 1.0) + 2.0 * k3(d) - k3(d - 1.0);
    let i11 = -k2(d) + k3(d + 1.0) - k3(d - 1.0) - k4(d + 1.0) + 2.0 * k4(d) - k4(d - 1.0);
    (i00, i10, i11)
}

fn quadrature_weights(d: f64, h: f64) -> (f64, f64, f64) {
    let gl = GaussLegendre::new(12);
    let c = h * (2.0 * h - 1.0);
    let (mut a, mut b, mut cc) = (0.0, 0.0, 0.0);
    for (x, wx) in gl.points(0.0, 1.0) {
        for (y, wy) in gl.points(0.0, 1.0) {
            let k = c * (d + x - y).abs().powf(2.0 * h - 2.0) * wx * wy;
            a += k;
            b += x * k;
            cc += x * y * k;
        }
    }
    (a, b, cc)
}

/// ⟨f, g⟩_H = H(2H−1) ∫∫ |r−u|^{2H−2} f(r) g(u) dr du, exact for
/// piecewise-linear and step functions on the grid.
pub fn inner_product_h<A, B>(f: &A, g: &B, h: f64) -> Result<f64>
where
    A: HElement + ?Sized,
    B: HElement + ?Sized,
{
    if !(h > 0.5 && h < 1.0) {
        return Err(Error::Domain(format!("inner product needs 1/2 < H < 1, got {h}")));
    }
    f.grid().check_same(g.grid())?;
    let grid = f.grid();
    let w = CellWeights::new(grid.steps(), h, grid.dt());
    let fc = f.cell_coefficients();
    let gc = g.cell_coefficients();
    let ab = bilinear(&w, &fc, &gc);
    let ba = bilinear(&w, &gc, &fc);
    Ok(0.5 * (ab + ba))
}

/// Same as [`inner_product_h`] with caller-supplied weights.
pub fn inner_product_h_with<A, B>(w: &CellWeights, f: &A, g: &B) -> f64
where
    A: HElement + ?Sized,
    B: HElement + ?Sized,
{
    let fc = f.cell_coefficients();
    let gc = g.cell_coefficients();
    0.5 * (bilinear(w, &fc, &gc) + bilinear(w, &gc, &fc))
}

pub use inner_product_h as inner_product_h_mixed;

/// Step-function inner product Σ_{k,l} f_k g_l Γ_{kl}.
pub fn inner_product_h_step(f: &StepFunction, g: &StepFunction, h: f64) -> Result<f64> {
    inner_product_h(f, g, h)
}

type Coeffs = (Vec<f64>, Option<Vec<f64>>);

fn bilinear(w: &CellWeights, f: &Coeffs, g: &Coeffs) -> f64 {
    let n = f.0.len();
    let mut total = 0.0;
    for k in 0..n {
        let (fa, fb) = (f.0[k], f.1.as_ref().map_or(0.0, |c| c[k]));
        if fa == 0.0 && fb == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for l in 0..n {
            let d = k as i64 - l as i64;
            let (ga, gb) = (g.0[l], g.1.as_ref().map_or(0.0, |c| c[l]));
            row += fa * (ga * w.w00(d) + gb * w.w01(d));
            if fb != 0.0 {
                row += fb * (ga * w.w10(d) + gb * w.w11(d));
            }
        }
        total += row;
    }
    total
}

/// Γ_{jk} = Δ^{2H} ρ_H(|j−k|): covariance of fBm increments over the cells,
/// equal to the H inner product of the cell indicators. Row-major.
pub fn fgn_gram(n: usize, h: f64, dt: f64) -> Vec<f64> {
    let scale = dt.powf(2.0 * h);
    let rho: Vec<f64> = (0..n).map(|k| rho_h(k as u64, h) * scale).collect();
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            g[i * n + j] = rho[i.abs_diff(j)];
        }
    }
    g
}
