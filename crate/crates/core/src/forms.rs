//! The quadratic forms of the free and interacting extensions.
//!
//! A state in the s-wave sector is written `psi = phi + q G_lambda`, where
//! `phi` is the plane radial profile of the regular part. The extension form
//! is evaluated as
//!
//! ```text
//! F[psi] = F_a[phi] + lambda^2 ||phi||^2 - lambda^2 ||psi||^2 + (beta + c lambda^{2a}) q^2,
//! ```
//!
//! with `||psi||^2 = ||phi||^2 + 2 q <phi, G> + q^2 ||G||^2` assembled from
//! Gram values, so the `r^{-alpha}` singularity of `G` is never sampled. The
//! interacting form adds `<phi, V phi>` on the regular part only.
//!
//! `F_a[phi] = 2 pi int r (phi'^2 + alpha^2 phi^2 / r^2) dr` is `2 pi` times the
//! sector form of `phi`; [`friedrichs_sector_form`] works on Fourier
//! components and carries no `2 pi`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::defect::{c_alpha, defect_difference, DefectFunction};
use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::quad::{integrate_radial, RadialOptions};
use crate::specfun::Order;
use crate::spectral::{defect_overlaps, potential_block, RadialBasis};

/// The extension label `beta`; [`ExtensionParameter::Friedrichs`] is the
/// `beta = +inf` member, which forces a vanishing charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtensionParameter {
    Finite(f64),
    Friedrichs,
}

impl ExtensionParameter {
    pub fn finite(beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::Domain(format!("beta must be finite, got {beta}")));
        }
        Ok(Self::Finite(beta))
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Finite(b) => Some(*b),
            Self::Friedrichs => None,
        }
    }

    pub fn is_friedrichs(&self) -> bool {
        matches!(self, Self::Friedrichs)
    }
}

impl std::fmt::Display for ExtensionParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Finite(b) => write!(f, "{b}"),
            Self::Friedrichs => f.write_str("friedrichs"),
        }
    }
}

impl std::str::FromStr for ExtensionParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("friedrichs") || s.eq_ignore_ascii_case("inf") {
            return Ok(Self::Friedrichs);
        }
        let b: f64 = s.parse().map_err(|_| {
            Error::Parse(format!("beta must be a number or `friedrichs`, got `{s}`"))
        })?;
        Self::finite(b)
    }
}

impl Serialize for ExtensionParameter {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(b) => ser.serialize_f64(*b),
            Self::Friedrichs => ser.serialize_str("friedrichs"),
        }
    }
}

type ProfileFn = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// A radial function on `(0, inf)`.
#[derive(Clone)]
pub enum RadialProfile {
    /// Samples on strictly increasing positive nodes; zero beyond the last
    /// node, power-law extrapolated below the first.
    Grid { nodes: Vec<f64>, values: Vec<f64> },
    /// Coefficients against a [`RadialBasis`].
    Basis {
        basis: RadialBasis,
        coeffs: Vec<f64>,
    },
    /// A closure returning `(f(r), f'(r))`, with a length scale and points
    /// where it is not smooth.
    Analytic {
        f: ProfileFn,
        scale: f64,
        breakpoints: Vec<f64>,
    },
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Grid { nodes, .. } => write!(f, "Grid({} nodes)", nodes.len()),
            Self::Basis { basis, coeffs } => write!(f, "Basis({basis:?}, {coeffs:?})"),
            Self::Analytic { scale, .. } => write!(f, "Analytic(scale {scale})"),
        }
    }
}

impl RadialProfile {
    pub fn zero() -> Self {
        Self::analytic(|_| (0.0, 0.0), 1.0)
    }

    pub fn analytic(f: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static, scale: f64) -> Self {
        Self::Analytic {
            f: Arc::new(f),
            scale,
            breakpoints: Vec::new(),
        }
    }

    pub fn grid(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() || nodes.len() < 3 {
            return Err(Error::Domain(
                "a grid needs at least three nodes and one value per node".into(),
            ));
        }
        if !(nodes[0] > 0.0)
            || nodes.windows(2).any(|w| !(w[1] > w[0]))
            || nodes.iter().any(|r| !r.is_finite())
        {
            return Err(Error::Domain(
                "grid nodes must be positive, finite and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("grid values must be finite".into()));
        }
        Ok(Self::Grid { nodes, values })
    }

    pub fn basis(basis: RadialBasis, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.size {
            return Err(Error::Domain(format!(
                "expected {} coefficients, got {}",
                basis.size,
                coeffs.len()
            )));
        }
        Ok(Self::Basis { basis, coeffs })
    }

    /// `(f(r), f'(r))`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        match self {
            Self::Analytic { f, .. } => f(r),
            Self::Basis { basis, coeffs } => {
                let smp = basis.sample(r);
                let dot = |v: &[f64]| v.iter().zip(coeffs).map(|(a, b)| a * b).sum();
                (dot(&smp.value), dot(&smp.deriv))
            }
            Self::Grid { nodes, values } => grid_eval(nodes, values, r),
        }
    }

    fn scale(&self) -> f64 {
        match self {
            Self::Analytic { scale, .. } => *scale,
            Self::Basis { basis, .. } => basis.scale,
            Self::Grid { nodes, .. } => nodes[nodes.len() / 2],
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Analytic { breakpoints, .. } => breakpoints.clone(),
            _ => Vec::new(),
        }
    }
}

fn grid_derivatives(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut d = vec![0.0; n];
    for i in 0..n {
        let (a, b, c) = if i == 0 {
            (0, 1, 2)
        } else if i == n - 1 {
            (n - 3, n - 2, n - 1)
        } else {
            (i - 1, i, i + 1)
        };
        // derivative of the quadratic through three nodes, at node i
        let (x0, x1, x2) = (nodes[a], nodes[b], nodes[c]);
        let (y0, y1, y2) = (values[a], values[b], values[c]);
        let x = nodes[i];
        d[i] = y0 * (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + y1 * (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + y2 * (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1));
    }
    d
}

fn grid_eval(nodes: &[f64], values: &[f64], r: f64) -> (f64, f64) {
    let n = nodes.len();
    if r >= nodes[n - 1] {
        return (0.0, 0.0);
    }
    if r <= nodes[0] {
        let p = power_exponent(nodes, values, |i| values[i]);
        let v = values[0] * (r / nodes[0]).powf(p);
        return (v, p * v / r);
    }
    let i = nodes.partition_point(|&x| x <= r);
    let (r0, r1) = (nodes[i - 1], nodes[i]);
    let t = (r - r0) / (r1 - r0);
    (
        values[i - 1] * (1.0 - t) + values[i] * t,
        (values[i] - values[i - 1]) / (r1 - r0),
    )
}

/// Local power `p` of `h(r) ~ C r^p` over the first decade of the grid.
fn power_exponent(nodes: &[f64], _values: &[f64], h: impl Fn(usize) -> f64) -> f64 {
    let j = nodes
        .iter()
        .position(|&r| r >= 10.0 * nodes[0])
        .unwrap_or(1)
        .max(1);
    let (h0, hj) = (h(0).abs(), h(j).abs());
    if h0 == 0.0 || hj == 0.0 {
        return 0.0;
    }
    (hj / h0).ln() / (nodes[j] / nodes[0]).ln()
}

/// Why a grid integral over `(0, inf)` failed.
enum GridFailure {
    Diverges(f64),
}

/// `int_0^inf h dr` from node samples: trapezoid in `log r`, plus a power-law
/// tail below the first node.
fn grid_integral(nodes: &[f64], h: &[f64]) -> std::result::Result<f64, GridFailure> {
    let mut total = 0.0;
    for i in 1..nodes.len() {
        let du = (nodes[i] / nodes[i - 1]).ln();
        total += 0.5 * du * (h[i] * nodes[i] + h[i - 1] * nodes[i - 1]);
    }
    let p = power_exponent(nodes, h, |i| h[i]);
    if h[0] != 0.0 {
        // ratio of consecutive inner decades of C r^p
        let rho = 10f64.powf(-(p + 1.0));
        if rho >= 0.9 {
            return Err(GridFailure::Diverges(p));
        }
        total += h[0] * nodes[0] / (p + 1.0);
    }
    Ok(total)
}

/// A Fourier component `psi_{2k}` of an even function.
#[derive(Debug, Clone)]
pub struct SectorState {
    pub sector: i32,
    pub profile: RadialProfile,
}

fn radial_opts(profile: &RadialProfile, extra: &[f64]) -> RadialOptions {
    let mut breakpoints = profile.breakpoints();
    breakpoints.extend_from_slice(extra);
    RadialOptions {
        breakpoints,
        rel_tol: 1e-12,
        ..RadialOptions::with_scale(profile.scale())
    }
}

/// `int r (|psi'|^2 + (2k + alpha)^2 |psi|^2 / r^2) dr`.
pub fn friedrichs_sector_form(state: &SectorState, order: Order) -> Result<f64> {
    let nu = 2.0 * state.sector as f64 + order.alpha();
    let nu2 = nu * nu;
    match &state.profile {
        RadialProfile::Basis { basis, coeffs } => {
            if basis.sector != state.sector || basis.order != order {
                return Err(Error::Precondition(
                    "basis sector/order differs from the state's".into(),
                ));
            }
            let k = basis.kinetic()?;
            let c = nalgebra::DVector::from_column_slice(coeffs);
            Ok((c.transpose() * k * &c)[(0, 0)])
        }
        RadialProfile::Analytic { f, .. } => {
            let res = integrate_radial(
                |r| {
                    let (v, d) = f(r);
                    r * (d * d + nu2 * v * v / (r * r))
                },
                &radial_opts(&state.profile, &[]),
            );
            if res.diverges_at_origin {
                return Err(Error::NotInFormDomain(format!(
                    "form integral diverges at the origin (inner decade ratios {:?})",
                    &res.inner_ratios[res.inner_ratios.len().saturating_sub(4)..]
                )));
            }
            if !res.converged || !res.value.is_finite() {
                return Err(Error::Quadrature("sector form".into()));
            }
            Ok(res.value)
        }
        RadialProfile::Grid { nodes, values } => {
            let d = grid_derivatives(nodes, values);
            let h: Vec<f64> = nodes
                .iter()
                .zip(values.iter().zip(&d))
                .map(|(&r, (&v, &dv))| r * (dv * dv + nu2 * v * v / (r * r)))
                .collect();
            grid_integral(nodes, &h).map_err(|GridFailure::Diverges(p)| {
                Error::NotInFormDomain(format!("form integrand behaves as r^{p:.3} at the origin"))
            })
        }
    }
}

/// Plane norm `2 pi int r f^2 dr`.
pub fn plane_norm_sq(profile: &RadialProfile) -> Result<f64> {
    match profile {
        RadialProfile::Basis { coeffs, .. } => {
            Ok(2.0 * PI * coeffs.iter().map(|c| c * c).sum::<f64>())
        }
        RadialProfile::Analytic { f, .. } => {
            let res = integrate_radial(
                |r| {
                    let v = f(r).0;
                    r * v * v
                },
                &radial_opts(profile, &[]),
            );
            if !res.converged {
                return Err(Error::Domain("profile is not square integrable".into()));
            }
            Ok(2.0 * PI * res.value)
        }
        RadialProfile::Grid { nodes, values } => {
            let h: Vec<f64> = nodes.iter().zip(values).map(|(r, v)| r * v * v).collect();
            grid_integral(nodes, &h)
                .map(|v| 2.0 * PI * v)
                .map_err(|_| Error::Domain("profile is not square integrable".into()))
        }
    }
}

/// Plane inner product `<f, G_lambda>`.
pub fn defect_overlap(profile: &RadialProfile, g: &DefectFunction) -> Result<f64> {
    match profile {
        RadialProfile::Basis { basis, coeffs } => {
            if basis.sector != 0 {
                return Err(Error::Precondition(
                    "defect overlaps need an s-wave basis".into(),
                ));
            }
            let ov = defect_overlaps(basis, g.scale)?;
            Ok(2.0 * PI * ov.iter().zip(coeffs).map(|(a, b)| a * b).sum::<f64>())
        }
        RadialProfile::Analytic { f, .. } => {
            let res = integrate_radial(
                |r| r * f(r).0 * g.eval(r).unwrap_or(0.0),
                &radial_opts(profile, &[1.0 / g.scale]),
            );
            if !res.converged {
                return Err(Error::Quadrature("overlap with the defect function".into()));
            }
            Ok(2.0 * PI * res.value)
        }
        RadialProfile::Grid { nodes, values } => {
            let mut h = Vec::with_capacity(nodes.len());
            for (&r, &v) in nodes.iter().zip(values) {
                h.push(r * v * g.eval(r)?);
            }
            grid_integral(nodes, &h)
                .map(|v| 2.0 * PI * v)
                .map_err(|_| Error::Quadrature("overlap with the defect function".into()))
        }
    }
}

/// Plane integral `<f, V f>`.
pub fn potential_energy(profile: &RadialProfile, potential: &Potential) -> Result<f64> {
    if potential.is_zero() {
        return Ok(0.0);
    }
    match profile {
        RadialProfile::Basis { basis, coeffs } => {
            let m = potential_block(basis, potential)?;
            let c = nalgebra::DVector::from_column_slice(coeffs);
            Ok(2.0 * PI * (c.transpose() * m * &c)[(0, 0)])
        }
        RadialProfile::Analytic { f, .. } => {
            let failure = std::cell::RefCell::new(None);
            let res = integrate_radial(
                |r| {
                    let v = f(r).0;
                    match potential.eval(r) {
                        Ok(p) => r * p * v * v,
                        Err(e) => {
                            failure.borrow_mut().get_or_insert(e);
                            0.0
                        }
                    }
                },
                &radial_opts(profile, &potential.breakpoints()),
            );
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            if !res.converged {
                return Err(Error::Quadrature("potential energy".into()));
            }
            Ok(2.0 * PI * res.value)
        }
        RadialProfile::Grid { nodes, values } => {
            let mut h = Vec::with_capacity(nodes.len());
            for (&r, &v) in nodes.iter().zip(values) {
                h.push(r * potential.eval(r)? * v * v);
            }
            grid_integral(nodes, &h)
                .map(|v| 2.0 * PI * v)
                .map_err(|_| Error::Quadrature("potential energy".into()))
        }
    }
}

/// `psi = phi + q G_lambda` in the s-wave sector, `phi` a plane profile.
#[derive(Debug, Clone)]
pub struct FormDecomposition {
    pub order: Order,
    pub regular: RadialProfile,
    pub charge: f64,
    pub lambda: f64,
}

impl FormDecomposition {
    pub fn new(order: Order, regular: RadialProfile, charge: f64, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be > 0, got {lambda}")));
        }
        if !charge.is_finite() {
            return Err(Error::Domain(format!(
                "charge must be finite, got {charge}"
            )));
        }
        if let RadialProfile::Basis { basis, .. } = &regular {
            if basis.sector != 0 || basis.order != order {
                return Err(Error::Precondition(
                    "the regular part lives in the s-wave sector of the same order".into(),
                ));
            }
        }
        Ok(Self {
            order,
            regular,
            charge,
            lambda,
        })
    }

    pub fn defect(&self) -> DefectFunction {
        DefectFunction {
            order: self.order,
            scale: self.lambda,
        }
    }

    /// The same state relative to another defect scale:
    /// `phi' = phi + q (G_lambda - G_lambda_alt)`.
    pub fn rescaled(&self, lambda_alt: f64) -> Result<Self> {
        if !(lambda_alt > 0.0) || !lambda_alt.is_finite() {
            return Err(Error::Domain(format!(
                "lambda must be > 0, got {lambda_alt}"
            )));
        }
        let (order, lambda, q) = (self.order, self.lambda, self.charge);
        let regular = self.regular.clone();
        let mut breakpoints = regular.breakpoints();
        breakpoints.push(1.0 / lambda.min(lambda_alt));
        let scale = regular.scale();
        let f = move |r: f64| {
            let (v, d) = regular.eval(r);
            let (dv, dd) = defect_difference(order, lambda, lambda_alt, r).unwrap_or((0.0, 0.0));
            (v + q * dv, d + q * dd)
        };
        Ok(Self {
            order,
            regular: RadialProfile::Analytic {
                f: Arc::new(f),
                scale,
                breakpoints,
            },
            charge: q,
            lambda: lambda_alt,
        })
    }
}

/// The four terms of the extension form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormTerms {
    /// `F_a[phi]` (plane).
    pub friedrichs: f64,
    pub regular_norm_sq: f64,
    pub psi_norm_sq: f64,
    /// `(beta + c lambda^{2a}) q^2`; zero for Friedrichs.
    pub charge_term: f64,
    pub lambda: f64,
}

impl FormTerms {
    pub fn value(&self) -> f64 {
        let l2 = self.lambda * self.lambda;
        self.friedrichs + l2 * self.regular_norm_sq - l2 * self.psi_norm_sq + self.charge_term
    }

    /// Sum of the absolute values of the terms, a scale for relative errors.
    pub fn magnitude(&self) -> f64 {
        let l2 = self.lambda * self.lambda;
        self.friedrichs.abs()
            + l2 * self.regular_norm_sq
            + l2 * self.psi_norm_sq
            + self.charge_term.abs()
    }
}

pub fn extension_form_terms(
    decomp: &FormDecomposition,
    beta: ExtensionParameter,
) -> Result<FormTerms> {
    let q = decomp.charge;
    let lambda = decomp.lambda;
    let charge_term = match beta {
        ExtensionParameter::Friedrichs if q != 0.0 => {
            return Err(Error::Precondition(
                "the Friedrichs extension requires q = 0".into(),
            ));
        }
        ExtensionParameter::Friedrichs => 0.0,
        ExtensionParameter::Finite(b) => {
            (b + c_alpha(decomp.order) * lambda.powf(2.0 * decomp.order.alpha())) * q * q
        }
    };
    let state = SectorState {
        sector: 0,
        profile: decomp.regular.clone(),
    };
    let friedrichs = 2.0 * PI * friedrichs_sector_form(&state, decomp.order)?;
    let regular_norm_sq = plane_norm_sq(&decomp.regular)?;
    let psi_norm_sq = if q == 0.0 {
        regular_norm_sq
    } else {
        let g = decomp.defect();
        regular_norm_sq + 2.0 * q * defect_overlap(&decomp.regular, &g)? + q * q * g.l2_norm_sq()
    };
    Ok(FormTerms {
        friedrichs,
        regular_norm_sq,
        psi_norm_sq,
        charge_term,
        lambda,
    })
}

/// `F_{alpha,beta}[psi]`.
pub fn extension_form(decomp: &FormDecomposition, beta: ExtensionParameter) -> Result<f64> {
    Ok(extension_form_terms(decomp, beta)?.value())
}

/// `F_{alpha,beta,V}[psi]`: the extension form plus `<phi, V phi>`.
pub fn interacting_form(
    decomp: &FormDecomposition,
    beta: ExtensionParameter,
    potential: &Potential,
) -> Result<f64> {
    let free = extension_form(decomp, beta)?;
    if potential.is_zero() {
        return Ok(free);
    }
    Ok(free + potential_energy(&decomp.regular, potential)?)
}

/// `||psi||^2` assembled from Gram values.
pub fn state_norm_sq(decomp: &FormDecomposition) -> Result<f64> {
    Ok(extension_form_terms(decomp, ExtensionParameter::Finite(0.0))?.psi_norm_sq)
}

/// Infimum of the form on unit vectors: `-V0` for `beta >= 0` (and
/// Friedrichs), `-(|beta| / c_alpha)^{1/alpha} - V0` otherwise.
pub fn lower_bound(order: Order, beta: ExtensionParameter, v0: f64) -> f64 {
    match beta {
        ExtensionParameter::Finite(b) if b < 0.0 => {
            -(b.abs() / c_alpha(order)).powf(1.0 / order.alpha()) - v0
        }
        _ => 0.0 - v0,
    }
}

/// Form values of one state at two defect scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaInvariance {
    pub value: f64,
    pub value_alt: f64,
    /// `|value - value_alt|` over the magnitude of the terms.
    pub relative_difference: f64,
}

/// Re-expresses the state at `lambda_alt` and compares the form values.
pub fn lambda_invariance_check(
    decomp: &FormDecomposition,
    beta: ExtensionParameter,
    lambda_alt: f64,
) -> Result<LambdaInvariance> {
    if lambda_alt == decomp.lambda {
        return Err(Error::Precondition(
            "lambda_alt must differ from the decomposition's lambda".into(),
        ));
    }
    if let ExtensionParameter::Finite(b) = beta {
        let a = decomp.order.alpha();
        let cl = c_alpha(decomp.order) * lambda_alt.powf(2.0 * a);
        if (b + cl).abs() <= 1e-12 * (b.abs() + cl) {
            return Err(Error::Precondition(
                "beta + c lambda_alt^{2 alpha} vanishes".into(),
            ));
        }
    }
    let t1 = extension_form_terms(decomp, beta)?;
    if decomp.charge == 0.0 {
        let v = t1.value();
        return Ok(LambdaInvariance {
            value: v,
            value_alt: v,
            relative_difference: 0.0,
        });
    }
    let t2 = extension_form_terms(&decomp.rescaled(lambda_alt)?, beta)?;
    let (v1, v2) = (t1.value(), t2.value());
    let scale = t1.magnitude().max(t2.magnitude());
    Ok(LambdaInvariance {
        value: v1,
        value_alt: v2,
        relative_difference: (v1 - v2).abs() / scale,
    })
}
