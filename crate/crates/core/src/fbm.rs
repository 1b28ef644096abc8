//! Exact sampling of fractional Brownian motion and the surplus process
//! X_t = u + σθt − σW_t^H.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{fmt_num, GridFunction, TimeGrid};
use crate::linalg::Cholesky;

/// Parameters of the surplus model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub u: f64,
    pub theta: f64,
    pub sigma: f64,
    #[serde(rename = "H")]
    pub h: f64,
}

impl ModelParams {
    pub fn new(u: f64, theta: f64, sigma: f64, h: f64) -> Result<Self> {
        let p = Self { u, theta, sigma, h };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, v: f64, req: &str| Err(Error::Domain(format!("{name} must be {req}, got {v}")));
        if !(self.u.is_finite() && self.u > 0.0) {
            return bad("u", self.u, "positive");
        }
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return bad("theta", self.theta, "positive");
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad("sigma", self.sigma, "positive");
        }
        check_hurst(self.h)
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        Self { sigma, ..*self }
    }

    pub fn with_u(&self, u: f64) -> Self {
        Self { u, ..*self }
    }
}

pub(crate) fn check_hurst(h: f64) -> Result<()> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain(format!("Hurst index must lie in (0, 1), got {h}")));
    }
    Ok(())
}

/// R_H(t, s) = ½(s^{2H} + t^{2H} − |t−s|^{2H}).
pub fn covariance(t: f64, s: f64, h: f64) -> Result<f64> {
    if !(t >= 0.0 && s >= 0.0) {
        return Err(Error::Domain(format!("covariance needs nonnegative times, got ({t}, {s})")));
    }
    check_hurst(h)?;
    let e = 2.0 * h;
    Ok(0.5 * (s.powf(e) + t.powf(e) - (t - s).abs().powf(e)))
}

/// Autocovariance of unit-step fractional Gaussian noise at lag k.
pub fn fgn_autocovariance(k: usize, h: f64) -> f64 {
    crate::special::rho_h(k as u64, h)
}

/// One sampled fBm path on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub grid: TimeGrid,
    /// W at every node; `w[0] = 0`.
    pub w: Vec<f64>,
    pub seed: u64,
    pub path_index: u64,
    pub h: f64,
}

impl SampledPath {
    /// Builds a path from given node values (w[0] must be 0).
    pub fn from_values(grid: TimeGrid, w: Vec<f64>, h: f64) -> Result<Self> {
        check_hurst(h)?;
        if w.len() != grid.len() {
            return Err(Error::Usage(format!("expected {} values, got {}", grid.len(), w.len())));
        }
        if w[0] != 0.0 {
            return Err(Error::Usage("fBm path must start at 0".into()));
        }
        Ok(Self { grid, w, seed: 0, path_index: 0, h })
    }

    /// Increments ξ_k = W_{t_{k+1}} − W_{t_k}.
    pub fn increments(&self) -> Vec<f64> {
        self.w.windows(2).map(|p| p[1] - p[0]).collect()
    }

    /// Sub-sampled path on every `stride`-th node.
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        let grid = self.grid.coarsen(stride)?;
        Ok(Self { grid, w: self.w.iter().step_by(stride).copied().collect(), ..self.clone() })
    }
}

/// Sampling algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    CirculantEmbedding,
    Cholesky,
}

/// Largest grid for which the dense Cholesky backend is allowed.
pub const CHOLESKY_MAX_STEPS: usize = 4096;

/// The random stream of path `index` under master `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

enum Engine {
    Circulant { sqrt_eig: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    Cholesky(Cholesky),
}

/// Reusable sampler for a fixed (grid, H).
///
/// Every path is a pure function of (seed, path index), so a batch can be
/// split across any number of threads without changing a single bit. The
/// circulant backend draws paths in pairs; the random stream is keyed by
/// the pair index.
pub struct FbmSampler {
    grid: TimeGrid,
    h: f64,
    engine: Engine,
    scale: f64,
}

/// Per-thread scratch space for [`FbmSampler::sample_into`].
#[derive(Default)]
pub struct SamplerScratch {
    buf: Vec<Complex<f64>>,
    fft: Vec<Complex<f64>>,
    z: Vec<f64>,
    xi: Vec<f64>,
    spare: Vec<f64>,
}

impl FbmSampler {
    /// Circulant embedding, falling back to Cholesky if the embedding has
    /// negative eigenvalues.
    pub fn new(grid: TimeGrid, h: f64) -> Result<Self> {
        check_hurst(h)?;
        let n = grid.steps();
        let m = 2 * n;
        let mut c: Vec<Complex<f64>> = (0..m)
            .map(|k| {
                let lag = if k <= n { k } else { m - k };
                Complex::new(fgn_autocovariance(lag, h), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut c);
        let max = c.iter().map(|z| z.re).fold(f64::MIN, f64::max);
        let min = c.iter().map(|z| z.re).fold(f64::MAX, f64::min);
        if min < -1e-10 * max {
            return Self::with_backend(grid, h, Backend::Cholesky);
        }
        let sqrt_eig = c.iter().map(|z| (z.re.max(0.0) / m as f64).sqrt()).collect();
        Ok(Self { grid, h, engine: Engine::Circulant { sqrt_eig, fft }, scale: grid.dt().powf(h) })
    }

    pub fn with_backend(grid: TimeGrid, h: f64, backend: Backend) -> Result<Self> {
        check_hurst(h)?;
        match backend {
            Backend::CirculantEmbedding => Self::new(grid, h),
            Backend::Cholesky => {
                let n = grid.steps();
                if n > CHOLESKY_MAX_STEPS {
                    return Err(Error::Sampler(format!(
                        "Cholesky backend limited to {CHOLESKY_MAX_STEPS} steps, got {n}"
                    )));
                }
                let chol = Cholesky::factor(n, &fgn_covariance_matrix(n, h))?;
                Ok(Self { grid, h, engine: Engine::Cholesky(chol), scale: grid.dt().powf(h) })
            }
        }
    }

    pub fn backend(&self) -> Backend {
        match self.engine {
            Engine::Circulant { .. } => Backend::CirculantEmbedding,
            Engine::Cholesky(_) => Backend::Cholesky,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> f64 {
        self.h
    }

    /// Writes the node values of path (seed, index) into `w` (length n+1).
    pub fn sample_into(&self, seed: u64, index: u64, scratch: &mut SamplerScratch, w: &mut [f64]) {
        match &self.engine {
            Engine::Circulant { .. } => {
                let mut other = std::mem::take(&mut scratch.spare);
                other.resize(w.len(), 0.0);
                if index.is_multiple_of(2) {
                    self.sample_pair_into(seed, index / 2, scratch, w, &mut other);
                } else {
                    self.sample_pair_into(seed, index / 2, scratch, &mut other, w);
                }
                scratch.spare = other;
            }
            Engine::Cholesky(chol) => {
                let n = self.grid.steps();
                assert_eq!(w.len(), n + 1);
                let mut rng = path_rng(seed, index);
                scratch.z.resize(n, 0.0);
                scratch.xi.resize(n, 0.0);
                for z in scratch.z.iter_mut() {
                    *z = rng.sample(StandardNormal);
                }
                chol.mul_lower(&scratch.z, &mut scratch.xi);
                self.integrate(&scratch.xi, w);
            }
        }
    }

    /// Writes paths 2k and 2k+1 of `seed`.
    ///
    /// With the circulant backend both come from one complex FFT (real and
    /// imaginary parts are independent with the target covariance); with
    /// Cholesky they are sampled separately.
    pub fn sample_pair_into(
        &self,
        seed: u64,
        pair: u64,
        scratch: &mut SamplerScratch,
        w_even: &mut [f64],
        w_odd: &mut [f64],
    ) {
        let n = self.grid.steps();
        assert_eq!(w_even.len(), n + 1);
        assert_eq!(w_odd.len(), n + 1);
        match &self.engine {
            Engine::Circulant { sqrt_eig, fft } => {
                let mut rng = path_rng(seed, pair);
                scratch.buf.resize(2 * n, Complex::new(0.0, 0.0));
                scratch.fft.resize(fft.get_inplace_scratch_len(), Complex::new(0.0, 0.0));
                for (b, s) in scratch.buf.iter_mut().zip(sqrt_eig) {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *b = Complex::new(s * re, s * im);
                }
                fft.process_with_scratch(&mut scratch.buf, &mut scratch.fft);
                let (mut a, mut b) = (0.0, 0.0);
                w_even[0] = 0.0;
                w_odd[0] = 0.0;
                for k in 0..n {
                    a += scratch.buf[k].re * self.scale;
                    b += scratch.buf[k].im * self.scale;
                    w_even[k + 1] = a;
                    w_odd[k + 1] = b;
                }
            }
            Engine::Cholesky(_) => {
                self.sample_into(seed, 2 * pair, scratch, w_even);
                self.sample_into(seed, 2 * pair + 1, scratch, w_odd);
            }
        }
    }

    fn integrate(&self, xi: &[f64], w: &mut [f64]) {
        w[0] = 0.0;
        let mut acc = 0.0;
        for (k, x) in xi.iter().enumerate() {
            acc += x * self.scale;
            w[k + 1] = acc;
        }
    }

    pub fn sample(&self, seed: u64, index: u64) -> SampledPath {
        let mut w = vec![0.0; self.grid.len()];
        self.sample_into(seed, index, &mut SamplerScratch::default(), &mut w);
        SampledPath { grid: self.grid, w, seed, path_index: index, h: self.h }
    }
}

/// Row-major covariance of n unit-step fGn increments.
pub fn fgn_covariance_matrix(n: usize, h: f64) -> Vec<f64> {
    let rho: Vec<f64> = (0..n).map(|k| fgn_autocovariance(k, h)).collect();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = rho[i.abs_diff(j)];
        }
    }
    a
}

/// Samples path 0 of `seed`.
pub fn sample_fbm(grid: TimeGrid, h: f64, seed: u64) -> Result<SampledPath> {
    Ok(FbmSampler::new(grid, h)?.sample(seed, 0))
}

/// X_{t_i} = u + σθt_i − σw_i.
pub fn surplus(path: &SampledPath, params: &ModelParams) -> Result<GridFunction> {
    if (path.h - params.h).abs() > 1e-15 {
        return Err(Error::Usage(format!(
            "path sampled with H = {} but model has H = {}",
            path.h, params.h
        )));
    }
    let g = path.grid;
    let values = path
        .w
        .iter()
        .enumerate()
        .map(|(i, w)| params.u + params.sigma * params.theta * g.t(i) - params.sigma * w)
        .collect();
    GridFunction::new(g, values)
}

/// M = max_i (w_i − θt_i) and the smallest index attaining it.
pub fn running_sup_drifted(path: &SampledPath, theta: f64) -> (f64, usize) {
    sup_drifted(&path.w, &path.grid, theta, 1)
}

/// Drifted maximum over every `stride`-th node of `w` on `grid`.
pub fn sup_drifted(w: &[f64], grid: &TimeGrid, theta: f64, stride: usize) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for i in (0..w.len()).step_by(stride) {
        let v = w[i] - theta * grid.t(i);
        if v > best {
            best = v;
            arg = i;
        }
    }
    (best, arg)
}

/// Writes columns (t, w, x) for a path and the surplus it drives.
pub fn write_path_csv<W: Write>(path: &SampledPath, params: &ModelParams, out: W) -> Result<()> {
    let x = surplus(path, params)?;
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["t", "w", "x"])?;
    for (i, (w, xv)) in path.w.iter().zip(x.values()).enumerate() {
        wtr.write_record([fmt_num(path.grid.t(i)), fmt_num(*w), fmt_num(*xv)])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn covariance_values() {
        assert!((covariance(0.7, 0.7, 0.3).unwrap() - 0.7f64.powf(0.6)).abs() < 1e-15);
        assert!((covariance(0.3, 0.8, 0.5).unwrap() - 0.3).abs() < 1e-15);
        assert!((covariance(1.0, 2.0, 0.7).unwrap() - 0.5 * 2f64.powf(1.4)).abs() < 1e-14);
        assert!(covariance(-1.0, 1.0, 0.5).is_err());
        assert!(covariance(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1.0, 1.0, 0.5, 0.6).is_ok());
        assert!(ModelParams::new(0.0, 1.0, 0.5, 0.6).is_err());
        assert!(ModelParams::new(1.0, -1.0, 0.5, 0.6).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.0, 0.6).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn same_seed_same_path() {
        let g = TimeGrid::new(1.0, 1000).unwrap();
        let a = sample_fbm(g, 0.65, 42).unwrap();
        let b = sample_fbm(g, 0.65, 42).unwrap();
        assert_eq!(a.w, b.w);
        assert_eq!(a.w[0], 0.0);
        let c = sample_fbm(g, 0.65, 43).unwrap();
        assert_ne!(a.w, c.w);
        let s = FbmSampler::new(g, 0.65).unwrap();
        assert_ne!(s.sample(42, 0).w, s.sample(42, 1).w);
    }

    #[test]
    fn circulant_is_default_for_fgn() {
        for &h in &[0.1, 0.5, 0.6, 0.75, 0.95] {
            let s = FbmSampler::new(TimeGrid::new(1.0, 64).unwrap(), h).unwrap();
            assert_eq!(s.backend(), Backend::CirculantEmbedding);
        }
    }

    #[test]
    fn brownian_increments_pass_normality_and_independence() {
        let n = 1024;
        let g = TimeGrid::new(1.0, n).unwrap();
        let s = FbmSampler::new(g, 0.5).unwrap();
        let sd = g.dt().sqrt();
        let (mut m2, mut m3, mut m4, mut lag, mut count) = (0.0, 0.0, 0.0, 0.0, 0usize);
        for i in 0..500 {
            let xi: Vec<f64> = s.sample(3, i).increments().iter().map(|x| x / sd).collect();
            for (k, x) in xi.iter().enumerate() {
                m2 += x * x;
                m3 += x * x * x;
                m4 += x * x * x * x;
                if k > 0 {
                    lag += x * xi[k - 1];
                }
            }
            count += xi.len();
        }
        let nf = count as f64;
        let var = m2 / nf;
        let skew = (m3 / nf) / var.powf(1.5);
        let kurt = (m4 / nf) / (var * var);
        let jb = nf / 6.0 * (skew * skew + 0.25 * (kurt - 3.0).powi(2));
        let p = 1.0 - ChiSquared::new(2.0).unwrap().cdf(jb);
        assert!(p > 0.01, "Jarque-Bera p = {p}");
        let r1 = lag / (nf - 500.0) / var;
        let z = r1 * (nf - 500.0).sqrt();
        assert!(z.abs() < 2.576, "lag-1 z = {z}");
        assert!((var - 1.0).abs() < 4.0 * (2.0 / nf).sqrt());
    }

    #[test]
    fn terminal_variance_matches_covariance() {
        let g = TimeGrid::new(1.0, 4096).unwrap();
        let s = FbmSampler::new(g, 0.7).unwrap();
        let m = 2000;
        let v: Vec<f64> = (0..m).map(|i| s.sample(9, i).w[4096]).collect();
        let mean = v.iter().sum::<f64>() / m as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0);
        let se = (2.0 / (m as f64 - 1.0)).sqrt();
        assert!((var - 1.0).abs() < 3.0 * se, "var {var} se {se}");
    }

    fn empirical_covariances(s: &FbmSampler, seed: u64, pairs: &[(usize, usize)], m: u64) -> Vec<(f64, f64)> {
        let mut acc = vec![Vec::with_capacity(m as usize); pairs.len()];
        for i in 0..m {
            let p = s.sample(seed, i);
            for (k, &(a, b)) in pairs.iter().enumerate() {
                acc[k].push(p.w[a] * p.w[b]);
            }
        }
        acc.iter()
            .map(|xs| {
                let mean = xs.iter().sum::<f64>() / m as f64;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0);
                (mean, (var / m as f64).sqrt())
            })
            .collect()
    }

    #[test]
    fn both_backends_reproduce_covariance() {
        let g = TimeGrid::new(2.0, 128).unwrap();
        let h = 0.7;
        let pairs = [(8, 8), (16, 128), (64, 96), (100, 128), (128, 128)];
        for backend in [Backend::CirculantEmbedding, Backend::Cholesky] {
            let s = FbmSampler::with_backend(g, h, backend).unwrap();
            assert_eq!(s.backend(), backend);
            for (&(a, b), (est, se)) in pairs.iter().zip(empirical_covariances(&s, 17, &pairs, 4000)) {
                let want = covariance(g.t(a), g.t(b), h).unwrap();
                assert!((est - want).abs() < 4.0 * se, "{backend:?} ({a},{b}) {est} vs {want}");
            }
        }
    }

    #[test]
    fn cholesky_backend_size_limit() {
        let g = TimeGrid::new(1.0, CHOLESKY_MAX_STEPS * 2).unwrap();
        assert!(matches!(FbmSampler::with_backend(g, 0.6, Backend::Cholesky), Err(Error::Sampler(_))));
    }

    #[test]
    fn surplus_cases() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let params = ModelParams::new(1.0, 1.0, 1.0, 0.6).unwrap();
        let zero = SampledPath::from_values(g, vec![0.0; 11], 0.6).unwrap();
        let x = surplus(&zero, &params).unwrap();
        for (i, v) in x.values().iter().enumerate() {
            assert!((v - (1.0 + g.t(i))).abs() < 1e-15);
        }
        let lin = SampledPath::from_values(g, g.times(), 0.6).unwrap();
        let x = surplus(&lin, &params).unwrap();
        assert!(x.values().iter().all(|v| (v - 1.0).abs() < 1e-15));
        let other = ModelParams::new(1.0, 1.0, 1.0, 0.7).unwrap();
        assert!(matches!(surplus(&lin, &other), Err(Error::Usage(_))));
    }

    #[test]
    fn sup_cases() {
        let g = TimeGrid::new(2.0, 10).unwrap();
        let zero = SampledPath::from_values(g, vec![0.0; 11], 0.6).unwrap();
        assert_eq!(running_sup_drifted(&zero, 1.5), (0.0, 0));
        let theta = 1.5;
        let up = SampledPath::from_values(g, g.times().iter().map(|t| 2.0 * theta * t).collect(), 0.6).unwrap();
        let (m, tau) = running_sup_drifted(&up, theta);
        assert!((m - theta * 2.0).abs() < 1e-14);
        assert_eq!(tau, 10);
    }

    #[test]
    fn path_csv_has_three_columns() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let p = sample_fbm(g, 0.6, 1).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&p, &ModelParams::new(1.0, 1.0, 0.5, 0.6).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,w,x\n0,0,1\n"));
        assert_eq!(text.lines().count(), 6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sup_agrees_with_linear_scan(seed in 0u64..10_000, h in 0.05f64..0.95, theta in 0.01f64..3.0) {
            let g = TimeGrid::new(1.5, 200).unwrap();
            let p = sample_fbm(g, h, seed).unwrap();
            let (m, tau) = running_sup_drifted(&p, theta);
            let mut best = f64::NEG_INFINITY;
            let mut arg = usize::MAX;
            for i in 0..=200 {
                let v = p.w[i] - theta * g.t(i);
                prop_assert!(m >= v);
                if v > best { best = v; arg = i; }
            }
            prop_assert_eq!(m, best);
            prop_assert_eq!(tau, arg);
        }

        #[test]
        fn ruin_equivalence(seed in 0u64..10_000, u in 0.01f64..2.0, sigma in 0.05f64..2.0, theta in 0.05f64..2.0) {
            let g = TimeGrid::new(1.0, 128).unwrap();
            let p = sample_fbm(g, 0.6, seed).unwrap();
            let params = ModelParams::new(u, theta, sigma, 0.6).unwrap();
            let x = surplus(&p, &params).unwrap();
            let min = x.values().iter().cloned().fold(f64::INFINITY, f64::min);
            let (m, _) = running_sup_drifted(&p, theta);
            let margin = (sigma * m - u).abs();
            prop_assume!(margin > 1e-12);
            prop_assert_eq!(min < 0.0, sigma * m > u);
        }
    }
}
