//! The smoothed NCP function `Phi(a, b; eps) = (a + b - sqrt((a - b)^2 + eps^2)) / 2`
//! and its derivatives, evaluated in cancellation-free forms.

use crate::float::{abs, hypot};
use thiserror::Error;

/// First and second partial derivatives of `Phi` with respect to `(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiDerivs {
    pub d_g: f64,
    pub d_h: f64,
    pub d_gg: f64,
    pub d_gh: f64,
    pub d_hh: f64,
}

#[derive(Clone, Copy, Debug, Error, PartialEq)]
pub enum NcpError {
    #[error("point is off the manifold (a+p)(b+p) = (eps/2)^2: relative residual {residual:.3e}")]
    OffManifold { residual: f64 },
    #[error("shifted arguments must be positive: a+p = {a_shift}, b+p = {b_shift}")]
    NonPositiveShift { a_shift: f64, b_shift: f64 },
}

/// `Phi(a, b; eps)`. With `eps = 0` this is `min(a, b)`.
pub fn phi(a: f64, b: f64, eps: f64) -> f64 {
    let r = hypot(a - b, eps);
    let s = a + b;
    if s > 0.0 {
        // (s - r) = (s^2 - r^2) / (s + r) = (4ab - eps^2) / (s + r)
        0.5 * (4.0 * a * b - eps * eps) / (s + r)
    } else {
        0.5 * (s - r)
    }
}

/// Derivatives of `Phi` at `(a, b)`. Requires `eps > 0`.
pub fn phi_derivs(a: f64, b: f64, eps: f64) -> PhiDerivs {
    let d = a - b;
    let r = hypot(d, eps);
    let e2 = eps * eps;
    // 1 - d/r = eps^2 / (r (r + d)) avoids cancellation when d > 0
    let d_g = if d > 0.0 { 0.5 * e2 / (r * (r + d)) } else { 0.5 * (1.0 - d / r) };
    let d_h = if d < 0.0 { 0.5 * e2 / (r * (r - d)) } else { 0.5 * (1.0 + d / r) };
    let q = 0.5 * e2 / (r * r * r);
    PhiDerivs {
        d_g,
        d_h,
        d_gg: -q,
        d_gh: q,
        d_hh: -q,
    }
}

/// Derivatives on the manifold `(a + p)(b + p) = (eps/2)^2`, where they take
/// the closed forms `d_g = (b+p)/(a+b+2p)` and second derivatives
/// `+-2(a+p)(b+p)/(a+b+2p)^3`.
pub fn phi_derivs_on_manifold(a: f64, b: f64, p: f64, eps: f64) -> Result<PhiDerivs, NcpError> {
    let (ap, bp) = (a + p, b + p);
    if ap <= 0.0 || bp <= 0.0 {
        return Err(NcpError::NonPositiveShift {
            a_shift: ap,
            b_shift: bp,
        });
    }
    let target = 0.25 * eps * eps;
    let residual = abs(ap * bp - target) / target;
    if !(residual <= 1e-8) {
        return Err(NcpError::OffManifold { residual });
    }
    let s = ap + bp;
    let q = 2.0 * ap * bp / (s * s * s);
    Ok(PhiDerivs {
        d_g: bp / s,
        d_h: ap / s,
        d_gg: -q,
        d_gh: q,
        d_hh: -q,
    })
}

/// Clarke weight for one complementarity pair: 1 on the `G = 0 < H` branch,
/// 0 on `G > 0 = H`, and the trailing `d_g` value on the biactive corner.
/// Classification uses the tolerance `tol`.
pub fn clarke_theta_with_tol(a: f64, b: f64, trailing_dg: f64, tol: f64) -> f64 {
    let a0 = abs(a) <= tol;
    let b0 = abs(b) <= tol;
    match (a0, b0) {
        (true, false) if b > 0.0 => 1.0,
        (false, true) if a > 0.0 => 0.0,
        _ => trailing_dg,
    }
}

/// [`clarke_theta_with_tol`] with the default activity tolerance
/// `1e-6 * max(1, |a|, |b|)`.
pub fn clarke_theta(a: f64, b: f64, trailing_dg: f64) -> f64 {
    let tol = 1e-6 * 1.0f64.max(abs(a)).max(abs(b));
    clarke_theta_with_tol(a, b, trailing_dg, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::float::sqrt;

    fn naive(a: f64, b: f64, e: f64) -> f64 {
        0.5 * (a + b - sqrt((a - b) * (a - b) + e * e))
    }

    #[test]
    fn values_from_definition() {
        assert_eq!(phi(1.0, 1.0, 0.0), 1.0);
        assert!((phi(0.0, 0.0, 1e-2) + 5e-3).abs() < 1e-17);
        assert_eq!(phi(3.0, -2.0, 0.0), -2.0);
        for &(a, b, e) in &[(0.3, 0.7, 0.1), (-1.0, 2.0, 0.5), (5.0, 5.0, 1.0)] {
            assert!((phi(a, b, e) - naive(a, b, e)).abs() < 1e-15);
        }
    }

    #[test]
    fn stable_form_keeps_relative_accuracy() {
        // a + b large, Phi tiny: the naive difference loses every digit
        let (a, b, e) = (1.0, 1e-10, 1e-6);
        let exact = 0.5 * (4.0 * a * b - e * e) / (a + b + sqrt((a - b) * (a - b) + e * e));
        assert!((phi(a, b, e) - exact).abs() <= 1e-15 * exact.abs());
        assert!((naive(a, b, e) - exact).abs() > 1e-8 * exact.abs());
    }

    #[test]
    fn manifold_derivatives() {
        let d = phi_derivs_on_manifold(0.005, 0.005, 0.0, 0.01).unwrap();
        assert!((d.d_g - 0.5).abs() < 1e-15);
        assert!((d.d_gh - 50.0).abs() < 1e-9);
        let raw = phi_derivs(0.005, 0.005, 0.01);
        assert!((raw.d_g - d.d_g).abs() < 1e-12);
        assert!((raw.d_gh - d.d_gh).abs() < 1e-9);
    }

    #[test]
    fn off_manifold_is_an_error() {
        assert!(matches!(
            phi_derivs_on_manifold(0.1, 0.1, 0.0, 0.01),
            Err(NcpError::OffManifold { .. })
        ));
    }

    #[test]
    fn derivative_cancellation_free_far_from_kink() {
        let d = phi_derivs(1e8, 0.0, 1.0);
        // d_g = eps^2 / (2 r (r + d)) ~ 1 / (4 * 1e16)
        assert!((d.d_g - 0.25e-16).abs() < 1e-30);
        assert!((d.d_h - 1.0).abs() < 1e-15);
    }

    #[test]
    fn theta_by_class() {
        assert_eq!(clarke_theta(0.0, 1.0, 0.3), 1.0);
        assert_eq!(clarke_theta(1.0, 0.0, 0.3), 0.0);
        assert_eq!(clarke_theta(0.0, 0.0, 0.3), 0.3);
    }
}
