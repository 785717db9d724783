//! The defect function `G_lambda(r) = lambda^alpha K_alpha(lambda r)`.
//!
//! `G_lambda` solves `(H_alpha + lambda^2) G = 0` away from the origin, is
//! square integrable on the plane, and carries the `r^{-alpha}` singularity
//! that separates the extensions from the Friedrichs one. All norms here
//! are planar: `<f, g> = 2 pi int r f g dr`.
//!
//! Closed forms used throughout:
//!
//! * `c_alpha = pi^2 / sin(pi alpha)`,
//! * `||G_lambda||^2 = alpha c_alpha lambda^{2 alpha - 2}`,
//! * `<G_a, G_b> = c_alpha (a^{2 alpha} - b^{2 alpha}) / (a^2 - b^2)`.
//!
//! The last identity is positive for every pair of scales, as it must be
//! for the inner product of two positive functions. The `*_quadrature`
//! functions compute the same quantities from `K_alpha` directly.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::{integrate_radial, RadialOptions};
use crate::specfun::{bessel_k, bessel_k_prime, gamma_unchecked, Order};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DefectFunction {
    pub order: Order,
    pub scale: f64,
}

/// Leading coefficients of `G_lambda(r) ~ singular r^{-alpha} + regular r^{alpha}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticCoefficients {
    pub singular: f64,
    pub regular: f64,
}

pub fn c_alpha(order: Order) -> f64 {
    PI * PI / (PI * order.alpha()).sin()
}

impl DefectFunction {
    pub fn new(order: Order, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Domain(format!(
                "defect scale lambda must be > 0, got {scale}"
            )));
        }
        Ok(Self { order, scale })
    }

    fn check_r(r: f64) -> Result<()> {
        if r.is_nan() || r <= 0.0 {
            return Err(Error::Domain(format!(
                "defect function needs r > 0, got {r}"
            )));
        }
        Ok(())
    }

    /// `G_lambda(r)`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        Self::check_r(r)?;
        let a = self.order.alpha();
        Ok(self.scale.powf(a) * bessel_k(self.order, self.scale * r)?.value)
    }

    /// `G_lambda'(r) = lambda^{alpha+1} K_alpha'(lambda r)`.
    pub fn eval_prime(&self, r: f64) -> Result<f64> {
        Self::check_r(r)?;
        let a = self.order.alpha();
        Ok(self.scale.powf(a + 1.0) * bessel_k_prime(self.order, self.scale * r)?.value)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        let a = self.order.alpha();
        a * c_alpha(self.order) * self.scale.powf(2.0 * a - 2.0)
    }

    pub fn asymptotic_coefficients(&self) -> AsymptoticCoefficients {
        let a = self.order.alpha();
        AsymptoticCoefficients {
            singular: 2f64.powf(a - 1.0) * gamma_unchecked(a),
            regular: -gamma_unchecked(1.0 - a) * self.scale.powf(2.0 * a)
                / (2f64.powf(1.0 + a) * a),
        }
    }

    /// Residual of the radial equation `-G'' - G'/r + alpha^2 G / r^2 + lambda^2 G`.
    pub fn ode_residual(&self, r: f64) -> Result<OdeResidual> {
        self.ode_residual_with_centrifugal(r, self.order.alpha())
    }

    /// Same as [`Self::ode_residual`] with `centrifugal` in place of `alpha`
    /// in the `1/r^2` term only (a sanity probe for the residual itself).
    ///
    /// `G''` comes from a five-point difference of the analytic `G'`, so the
    /// residual is a genuine check of `K_alpha` against its differential
    /// equation rather than an identity.
    pub fn ode_residual_with_centrifugal(&self, r: f64, centrifugal: f64) -> Result<OdeResidual> {
        Self::check_r(r)?;
        let h = 1e-3 * r.min(1.0 / self.scale);
        let d = |x: f64| self.eval_prime(x);
        let second =
            (-d(r + 2.0 * h)? + 8.0 * d(r + h)? - 8.0 * d(r - h)? + d(r - 2.0 * h)?) / (12.0 * h);
        let g = self.eval(r)?;
        let gp = self.eval_prime(r)?;
        let terms = [
            -second,
            -gp / r,
            centrifugal * centrifugal / (r * r) * g,
            self.scale * self.scale * g,
        ];
        Ok(OdeResidual {
            residual: terms.iter().sum(),
            magnitude: terms.iter().fold(0.0f64, |m, t| m.max(t.abs())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeResidual {
    pub residual: f64,
    /// Largest absolute term of the equation, for relative comparisons.
    pub magnitude: f64,
}

/// `<G_{lambda1}, G_{lambda2}>` from the closed form.
pub fn cross_gram(order: Order, lambda1: f64, lambda2: f64) -> Result<f64> {
    if !(lambda1 > 0.0 && lambda2 > 0.0) {
        return Err(Error::Domain(format!(
            "cross_gram scales must be positive, got {lambda1}, {lambda2}"
        )));
    }
    if lambda1 == lambda2 {
        return Err(Error::Precondition(
            "cross_gram needs distinct scales; use l2_norm_sq for lambda1 = lambda2".into(),
        ));
    }
    let a = order.alpha();
    // (l1^{2a} - l2^{2a}) / (l1^2 - l2^2) written with expm1 so that nearby
    // scales do not cancel
    let t = (lambda2 / lambda1).ln();
    let num = -lambda1.powf(2.0 * a) * (2.0 * a * t).exp_m1();
    let den = -lambda1 * lambda1 * (2.0 * t).exp_m1();
    Ok(c_alpha(order) * num / den)
}

/// `G_{lambda1}(r) - G_{lambda2}(r)` and its derivative, without the
/// cancellation of the two `r^{-alpha}` singular parts at small `r`.
pub fn defect_difference(order: Order, lambda1: f64, lambda2: f64, r: f64) -> Result<(f64, f64)> {
    if r.is_nan() || r <= 0.0 {
        return Err(Error::Domain(format!(
            "defect function needs r > 0, got {r}"
        )));
    }
    let a = order.alpha();
    if lambda1.max(lambda2) * r > 1.0 {
        let g1 = DefectFunction::new(order, lambda1)?;
        let g2 = DefectFunction::new(order, lambda2)?;
        return Ok((
            g1.eval(r)? - g2.eval(r)?,
            g1.eval_prime(r)? - g2.eval_prime(r)?,
        ));
    }
    // lambda^a K_a(lambda r) = pi/(2 sin pi a) sum_k [ (r/2)^{2k-a} lambda^{2k} / (k! Gamma(k+1-a))
    //                                               - (r/2)^{2k+a} lambda^{2k+2a} / (k! Gamma(k+1+a)) ]
    // and the k = 0 singular term is independent of lambda.
    let half = 0.5 * r;
    let q = half * half;
    let pref = PI / (2.0 * (PI * a).sin());
    let mut value = 0.0;
    let mut deriv = 0.0;
    // singular family, k >= 1
    let mut base = half.powf(-a) / gamma_unchecked(1.0 - a);
    let (mut p1, mut p2) = (1.0, 1.0);
    for k in 1..200 {
        let kf = k as f64;
        base *= q / (kf * (kf - a));
        p1 *= lambda1 * lambda1;
        p2 *= lambda2 * lambda2;
        let term = base * (p1 - p2);
        value += term;
        deriv += term * (2.0 * kf - a) / r;
        if term.abs() < 1e-17 * value.abs() {
            break;
        }
    }
    // regular family, k >= 0
    let mut base = half.powf(a) / gamma_unchecked(1.0 + a);
    let (mut p1, mut p2) = (lambda1.powf(2.0 * a), lambda2.powf(2.0 * a));
    for k in 0..200 {
        let kf = k as f64;
        if k > 0 {
            base *= q / (kf * (kf + a));
            p1 *= lambda1 * lambda1;
            p2 *= lambda2 * lambda2;
        }
        let term = base * (p1 - p2);
        value -= term;
        deriv -= term * (2.0 * kf + a) / r;
        if k > 0 && term.abs() < 1e-17 * value.abs() {
            break;
        }
    }
    Ok((pref * value, pref * deriv))
}

fn quad_opts(scale: f64) -> RadialOptions {
    RadialOptions {
        rel_tol: 1e-13,
        ..RadialOptions::with_scale(scale)
    }
}

/// `(2 pi / alpha) int_0^inf r K_alpha(r)^2 dr`, the quadrature route to `c_alpha`.
pub fn c_alpha_quadrature(order: Order) -> Result<f64> {
    let f = |r: f64| {
        let k = bessel_k(order, r).map(|e| e.value).unwrap_or(0.0);
        r * k * k
    };
    let res = integrate_radial(f, &quad_opts(1.0));
    if !res.converged {
        return Err(Error::Quadrature("c_alpha integral".into()));
    }
    Ok(2.0 * PI / order.alpha() * res.value)
}

/// `2 pi int_0^inf r G_{lambda1} G_{lambda2} dr` by quadrature (also valid
/// for `lambda1 = lambda2`).
pub fn cross_gram_quadrature(order: Order, lambda1: f64, lambda2: f64) -> Result<f64> {
    let g1 = DefectFunction::new(order, lambda1)?;
    let g2 = DefectFunction::new(order, lambda2)?;
    let f = |r: f64| r * g1.eval(r).unwrap_or(0.0) * g2.eval(r).unwrap_or(0.0);
    let res = integrate_radial(f, &quad_opts(1.0 / lambda1.min(lambda2)));
    if !res.converged {
        return Err(Error::Quadrature("cross-Gram integral".into()));
    }
    Ok(2.0 * PI * res.value)
}

pub fn l2_norm_sq_quadrature(g: &DefectFunction) -> Result<f64> {
    cross_gram_quadrature(g.order, g.scale, g.scale)
}
