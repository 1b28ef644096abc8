//! Dense Cholesky factorization for the small covariance systems used here.

use crate::error::{Error, Result};

/// Lower-triangular factor L with A = L Lᵀ, stored row-major in full.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
    ridge: f64,
}

impl Cholesky {
    /// Factors a symmetric positive definite matrix given row-major.
    ///
    /// On failure a diagonal ridge of 1e-12, 1e-10 and 1e-8 times the mean
    /// diagonal is tried in turn.
    pub fn factor(n: usize, a: &[f64]) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        if let Some(l) = try_factor(n, a, 0.0) {
            return Ok(Self { n, l, ridge: 0.0 });
        }
        let scale = (0..n).map(|i| a[i * n + i]).sum::<f64>() / n as f64;
        for rel in [1e-12, 1e-10, 1e-8] {
            let ridge = rel * scale;
            if let Some(l) = try_factor(n, a, ridge) {
                return Ok(Self { n, l, ridge });
            }
        }
        Err(Error::Sampler(format!(
            "covariance matrix of size {n} is not positive definite even with ridge {:e}",
            1e-8 * scale
        )))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Diagonal ridge that had to be added, zero if none.
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// y = L z.
    pub fn mul_lower(&self, z: &[f64], y: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i + 1];
            y[i] = row.iter().zip(&z[..=i]).map(|(a, b)| a * b).sum();
        }
    }

    /// Solves A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(a, c)| a * c).sum();
            b[i] = (b[i] - s) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

fn try_factor(n: usize, a: &[f64], ridge: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j] + ridge;
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            for k in 0..j {
                s -= ri[k] * rj[k];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let n = 5;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = 1.0 / (1.0 + (i as f64 - j as f64).abs());
            }
            a[i * n + i] += 1.0;
        }
        let c = Cholesky::factor(n, &a).unwrap();
        assert_eq!(c.ridge(), 0.0);
        let b = [1.0, -2.0, 0.5, 3.0, 0.0];
        let x = c.solve(&b);
        for i in 0..n {
            let r: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn lower_factor_of_known_matrix() {
        let c = Cholesky::factor(2, &[4.0, 2.0, 2.0, 5.0]).unwrap();
        let mut y = [0.0; 2];
        c.mul_lower(&[1.0, 1.0], &mut y);
        assert_eq!(y, [2.0, 3.0]);
    }

    #[test]
    fn rejects_indefinite() {
        let a = [1.0, 2.0, 2.0, 1.0];
        assert!(Cholesky::factor(2, &a).is_err());
    }

    #[test]
    fn ridge_rescues_singular() {
        let a = [1.0, 1.0, 1.0, 1.0];
        let c = Cholesky::factor(2, &a).unwrap();
        assert!(c.ridge() > 0.0);
    }
}
