use super::{check_h_above_half, QuadScheme, QuadratureConfig};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::special::{beta_fn, gamma_fn};

/// c_H = [H(2H−1) / B(2−2H, H−1/2)]^{1/2}.
pub fn c_h_const(h: f64) -> Result<f64> {
    check_h_above_half(h)?;
    Ok((h * (2.0 * h - 1.0) / beta_fn(2.0 - 2.0 * h, h - 0.5)?).sqrt())
}

/// d_H = 1 / (c_H Γ(H−1/2)).
pub fn d_h_const(h: f64) -> Result<f64> {
    Ok(1.0 / (c_h_const(h)? * gamma_fn(h - 0.5)?))
}

/// K_H(t, s) = c_H s^{1/2−H} ∫_s^t (u−s)^{H−3/2} u^{H−1/2} du for 0 < s < t.
///
/// Zero for s ≥ t.
pub fn kernel_k_h(t: f64, s: f64, h: f64, quad: &QuadratureConfig) -> Result<f64> {
    check_h_above_half(h)?;
    quad.validate()?;
    if !(s > 0.0) {
        return Err(Error::Domain(format!("kernel_K_H needs s > 0, got {s}")));
    }
    if s >= t {
        return Ok(0.0);
    }
    let a = h - 0.5;
    let integral = match quad.scheme {
        QuadScheme::SingularitySubstituted => {
            // u = s + v^{1/a}: the integral becomes (1/a) ∫_0^{(t−s)^a} (s + v^{1/a})^a dv.
            let gl = GaussLegendre::new(16);
            let top = (t - s).powf(a);
            gl.integrate_composite(0.0, top, quad.refinement, |v| (s + v.powf(1.0 / a)).powf(a)) / a
        }
        QuadScheme::ProductRule => {
            // Piecewise-linear u^a on geometric panels, integrated exactly
            // against (u−s)^{a−1}.
            let panels = 16 * quad.refinement;
            let len = t - s;
            let mut acc = 0.0;
            let node = |k: usize| len * (k as f64 / panels as f64).powi(2);
            for k in 0..panels {
                let (z0, z1) = (node(k), node(k + 1));
                let (f0, f1) = ((s + z0).powf(a), (s + z1).powf(a));
                let slope = (f1 - f0) / (z1 - z0);
                // ∫_{z0}^{z1} z^{a−1} (f0 + slope (z − z0)) dz
                let p0 = (z1.powf(a) - z0.powf(a)) / a;
                let p1 = (z1.powf(a + 1.0) - z0.powf(a + 1.0)) / (a + 1.0);
                acc += (f0 - slope * z0) * p0 + slope * p1;
            }
            acc
        }
    };
    Ok(c_h_const(h)? * s.powf(-a) * integral)
}

/// ∫_0^{min(t,s)} K(t,r) K(s,r) dr with substitutions removing both
/// endpoint singularities.
pub fn kernel_isometry(t: f64, s: f64, h: f64, q: &QuadratureConfig) -> Result<f64> {
    check_h_above_half(h)?;
    q.validate()?;
    if !(t > 0.0 && s > 0.0) {
        return Err(Error::Domain(format!("isometry needs t, s > 0, got ({t}, {s})")));
    }
    let a = h - 0.5;
    let top = t.min(s);
    let gl = GaussLegendre::new(16);
    let k = |r: f64| kernel_k_h(t, r, h, q).unwrap_or(f64::NAN) * kernel_k_h(s, r, h, q).unwrap_or(f64::NAN);
    let mid = 0.5 * top;
    // r = mid x^b near 0 with b = 1/(1−2a) cancels r^{−2a}.
    let b = 1.0 / (1.0 - 2.0 * a);
    let lower = gl.integrate_composite(0.0, 1.0, 16, |x| {
        let r = mid * x.powf(b);
        k(r) * mid * b * x.powf(b - 1.0)
    });
    // r = top − mid y^{1/a} near the upper end, where K(top, r) ∝ (top − r)^a.
    let upper = gl.integrate_composite(0.0, 1.0, 16, |y| {
        let r = top - mid * y.powf(1.0 / a);
        k(r) * mid / a * y.powf(1.0 / a - 1.0)
    });
    Ok(lower + upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::covariance;

    #[test]
    fn constants() {
        for &h in &[0.55, 0.6, 0.7] {
            let c = c_h_const(h).unwrap();
            assert!(c > 0.0);
            assert!((d_h_const(h).unwrap() * c * gamma_fn(h - 0.5).unwrap() - 1.0).abs() < 1e-14);
        }
        let mut h = 0.51;
        while h < 0.75 {
            assert!(c_h_const(h).unwrap().is_finite());
            h += 0.01;
        }
        assert!(c_h_const(0.5).is_err());
        // B(0.6, 0.2) = ∫ t^{-0.4}(1-t)^{-0.8} dt, split at 1/2 with t = v^{1/0.6}
        // on the left and 1 − t = w^5 on the right.
        let gl = GaussLegendre::new(30);
        let left = gl.integrate_composite(0.0, 0.5f64.powf(0.6), 32, |v| {
            (1.0 - v.powf(1.0 / 0.6)).powf(-0.8) / 0.6
        });
        let right = gl.integrate_composite(0.0, 0.5f64.powf(0.2), 32, |w| 5.0 * (1.0 - w.powi(5)).powf(-0.4));
        let b_quad = left + right;
        assert!((beta_fn(0.6, 0.2).unwrap() - b_quad).abs() < 1e-10 * b_quad);
        let want = (0.7 * 0.4 / b_quad).sqrt();
        assert!((c_h_const(0.7).unwrap() - want).abs() < 1e-10);
    }
    #[test]
    fn zero_above_diagonal_and_domain() {
        let q = QuadratureConfig::default();
        assert_eq!(kernel_k_h(0.3, 0.5, 0.7, &q).unwrap(), 0.0);
        assert!(kernel_k_h(0.3, 0.0, 0.7, &q).is_err());
        assert!(kernel_k_h(0.3, 0.1, 0.4, &q).is_err());
    }

    #[test]
    fn monotone_in_t() {
        let q = QuadratureConfig::default();
        let mut prev = 0.0;
        for k in 1..20 {
            let v = kernel_k_h(0.2 + 0.05 * k as f64, 0.2, 0.65, &q).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn refinement_and_schemes_agree() {
        for &(t, s, h) in &[(1.0, 0.3, 0.65), (0.5, 0.01, 0.55), (2.0, 1.9, 0.7)] {
            let a = kernel_k_h(t, s, h, &QuadratureConfig { scheme: QuadScheme::SingularitySubstituted, refinement: 8 }).unwrap();
            let b = kernel_k_h(t, s, h, &QuadratureConfig { scheme: QuadScheme::SingularitySubstituted, refinement: 16 }).unwrap();
            assert!((a - b).abs() < 1e-6 * a.abs().max(1.0));
            let c = kernel_k_h(t, s, h, &QuadratureConfig { scheme: QuadScheme::ProductRule, refinement: 8 }).unwrap();
            assert!((a - c).abs() < 1e-4 * a.abs().max(1.0), "{a} {c}");
        }
    }

    #[test]
    fn isometry_on_grid() {
        let h = 0.65;
        let q = QuadratureConfig::default();
        let pts = [0.2, 0.4, 0.6, 0.8, 1.0];
        for &t in &pts {
            for &s in &pts {
                let got = kernel_isometry(t, s, h, &q).unwrap();
                let want = covariance(t, s, h).unwrap();
                assert!((got - want).abs() < 1e-3, "({t},{s}): {got} vs {want}");
            }
        }
    }
}
