//! Rayleigh-Ritz spectra per angular sector.
//!
//! The s-wave trial space is the weighted Laguerre basis (the regular part
//! `phi`) plus one extra vector `G_lambda` carrying the charge `q`, so a
//! coefficient vector `(c_0, .., c_{N-1}, q)` describes
//! `psi = sum c_i phi_i + q G_lambda`. The matrices are the extension form and
//! the plane norm on that space:
//!
//! ```text
//! A = [ 2 pi (K + V)          -lambda^2 2 pi g                     ]
//!     [ -lambda^2 2 pi g^T    beta + c lambda^{2a} - lambda^2 |G|^2 ]
//! M = [ 2 pi I                2 pi g ]
//!     [ 2 pi g^T              |G|^2  ]
//! ```
//!
//! with `g_i = int r phi_i G_lambda dr`. Other sectors use the plain
//! Friedrichs block in sector units, independent of `beta`.

pub mod basis;
mod charge;

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::defect::{c_alpha, DefectFunction};
use crate::error::{Error, Result};
use crate::forms::ExtensionParameter;
use crate::potentials::Potential;
use crate::quad::integrate_vector;
use crate::specfun::Order;

pub use basis::{gauss_laguerre, BasisKey, BasisSample, RadialBasis};
pub use charge::{
    eigenfunction_residual, extract_charge_condition, fit_boundary, interacting_charge_term,
    potential_defect_overlap, BoundaryFit, ChargeReport,
};

/// Number of Ritz values quoted in reports.
pub const REPORTED: usize = 5;

/// `-(|beta| / c_alpha)^{1/alpha}`, the single eigenvalue for `beta < 0`.
pub fn closed_form_ground_energy(order: Order, beta: f64) -> Result<f64> {
    Ok(-lambda_bar(order, beta)?.powi(2))
}

/// `(|beta| / c_alpha)^{1/(2 alpha)}`, the decay rate of the bound state.
pub fn lambda_bar(order: Order, beta: f64) -> Result<f64> {
    if !(beta < 0.0) || !beta.is_finite() {
        return Err(Error::Precondition(format!(
            "a bound state exists only for finite beta < 0, got {beta}"
        )));
    }
    Ok((beta.abs() / c_alpha(order)).powf(0.5 / order.alpha()))
}

/// Basis scale: the bound-state length `1/lambda_bar` for `beta < 0`, else 1.
pub fn default_scale(order: Order, beta: ExtensionParameter) -> f64 {
    match beta {
        ExtensionParameter::Finite(b) if b < 0.0 => 1.0 / lambda_bar(order, b).unwrap(),
        _ => 1.0,
    }
}

/// Defect scale: `1.1 lambda_bar` for `beta < 0` (kept covariant with the
/// basis scale), else 1.
pub fn default_lambda(order: Order, beta: ExtensionParameter) -> f64 {
    match beta {
        ExtensionParameter::Finite(b) if b < 0.0 => 1.1 * lambda_bar(order, b).unwrap(),
        _ => 1.0,
    }
}

type OverlapKey = (BasisKey, u64);

fn overlap_cache() -> &'static RwLock<HashMap<OverlapKey, Arc<Vec<f64>>>> {
    static CACHE: OnceLock<RwLock<HashMap<OverlapKey, Arc<Vec<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// `g_i = int r phi_i G_lambda dr` (sector units), cached per basis and scale.
pub fn defect_overlaps(basis: &RadialBasis, lambda: f64) -> Result<Arc<Vec<f64>>> {
    let key = (basis.key(), lambda.to_bits());
    if let Some(v) = overlap_cache().read().unwrap().get(&key) {
        return Ok(v.clone());
    }
    let g = DefectFunction::new(basis.order, lambda)?;
    let n = basis.size;
    let mut vals = vec![0.0; n];
    let mut failure = None;
    let res = integrate_vector(
        |r, out| {
            basis.values_into(r, &mut vals);
            let gr = match g.eval(r) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            };
            for (o, v) in out.iter_mut().zip(&vals) {
                *o = r * v * gr;
            }
        },
        n,
        &basis.panel_edges(&[1.0 / lambda]),
        1e-13,
        4,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if !res.converged {
        return Err(Error::Quadrature(format!(
            "basis/defect overlaps (error {:.2e})",
            res.abs_error
        )));
    }
    let v = Arc::new(res.values);
    overlap_cache().write().unwrap().insert(key, v.clone());
    Ok(v)
}

/// `int r V phi_i phi_j dr` (sector units).
pub fn potential_block(basis: &RadialBasis, potential: &Potential) -> Result<DMatrix<f64>> {
    let n = basis.size;
    if potential.is_zero() {
        return Ok(DMatrix::zeros(n, n));
    }
    let mut vals = vec![0.0; n];
    let mut failure = None;
    let res = integrate_vector(
        |r, out| {
            basis.values_into(r, &mut vals);
            let v = match potential.eval(r) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            };
            let mut idx = 0;
            for i in 0..n {
                for j in 0..=i {
                    out[idx] = r * v * vals[i] * vals[j];
                    idx += 1;
                }
            }
        },
        n * (n + 1) / 2,
        &basis.panel_edges(&potential.breakpoints()),
        1e-13,
        4,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if !res.converged {
        return Err(Error::Quadrature(format!(
            "potential matrix (error {:.2e})",
            res.abs_error
        )));
    }
    let mut m = DMatrix::zeros(n, n);
    let mut idx = 0;
    for i in 0..n {
        for j in 0..=i {
            m[(i, j)] = res.values[idx];
            m[(j, i)] = res.values[idx];
            idx += 1;
        }
    }
    Ok(m)
}

/// Form and norm matrices on a trial space.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub form: DMatrix<f64>,
    pub norm: DMatrix<f64>,
    /// Whether the last row/column is the charge degree of freedom.
    pub has_charge: bool,
}

/// s-wave matrices in plane units. `lambda` may equal `lambda_bar`, where
/// `beta + c lambda^{2 alpha} = 0`: the form is still well defined, only the
/// boundary condition for `q` degenerates.
pub fn assemble_swave(
    beta: ExtensionParameter,
    potential: &Potential,
    basis: &RadialBasis,
    lambda: f64,
) -> Result<Assembled> {
    if basis.sector != 0 {
        return Err(Error::Precondition(format!(
            "s-wave assembly needs sector 0, got {}",
            basis.sector
        )));
    }
    let n = basis.size;
    let two_pi = 2.0 * std::f64::consts::PI;
    let regular = (basis.kinetic()? + potential_block(basis, potential)?) * two_pi;
    let beta = match beta {
        ExtensionParameter::Friedrichs => {
            return Ok(Assembled {
                form: regular,
                norm: basis.gram() * two_pi,
                has_charge: false,
            });
        }
        ExtensionParameter::Finite(b) => b,
    };
    let order = basis.order;
    let g = DefectFunction::new(order, lambda)?;
    let overlaps = defect_overlaps(basis, lambda)?;
    let l2 = lambda * lambda;
    let g_norm = g.l2_norm_sq();
    let mut form = DMatrix::zeros(n + 1, n + 1);
    let mut norm = DMatrix::zeros(n + 1, n + 1);
    form.view_mut((0, 0), (n, n)).copy_from(&regular);
    for i in 0..n {
        norm[(i, i)] = two_pi;
        let gi = two_pi * overlaps[i];
        form[(i, n)] = -l2 * gi;
        form[(n, i)] = -l2 * gi;
        norm[(i, n)] = gi;
        norm[(n, i)] = gi;
    }
    form[(n, n)] = beta + c_alpha(order) * lambda.powf(2.0 * order.alpha()) - l2 * g_norm;
    norm[(n, n)] = g_norm;
    Ok(Assembled {
        form,
        norm,
        has_charge: true,
    })
}

/// Matrices for a sector `k != 0` (sector units); `beta` does not enter.
pub fn assemble_sector(potential: &Potential, basis: &RadialBasis) -> Result<Assembled> {
    if basis.sector == 0 {
        return Err(Error::Precondition(
            "use assemble_swave for sector 0".into(),
        ));
    }
    Ok(Assembled {
        form: basis.kinetic()? + potential_block(basis, potential)?,
        norm: basis.gram(),
        has_charge: false,
    })
}

/// Ascending eigenpairs of `A x = E M x`, eigenvectors `M`-normalized.
pub fn generalized_eigen(
    form: &DMatrix<f64>,
    norm: &DMatrix<f64>,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = form.nrows();
    if form.iter().chain(norm.iter()).any(|x| !x.is_finite()) {
        return Err(Error::LinearAlgebra(
            "matrices have non-finite entries (scales out of range)".into(),
        ));
    }
    let chol = Cholesky::new(norm.clone())
        .ok_or_else(|| Error::LinearAlgebra("norm matrix is not positive definite".into()))?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(form)
        .ok_or_else(|| Error::LinearAlgebra("singular Cholesky factor".into()))?;
    let mut c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::LinearAlgebra("singular Cholesky factor".into()))?;
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(c);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::LinearAlgebra("non-finite Ritz values".into()));
    }
    let lt = l.transpose();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        let y: DVector<f64> = eig.eigenvectors.column(i).into_owned();
        let v = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| Error::LinearAlgebra("singular Cholesky factor".into()))?;
        vectors.set_column(col, &v);
    }
    Ok((values, vectors))
}

/// One Ritz pair: `psi = sum regular_i phi_i + charge G_lambda`, `||psi|| = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RitzState {
    pub energy: f64,
    pub regular: Vec<f64>,
    pub charge: Option<f64>,
}

impl RitzState {
    /// Coefficients `(c_0, .., c_{N-1}, q)`, with `q` only when present.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut v = self.regular.clone();
        v.extend(self.charge);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralResult {
    pub sector: i32,
    pub beta: ExtensionParameter,
    pub basis: RadialBasis,
    /// Defect scale of the charge vector (s-wave with finite `beta` only).
    pub lambda_used: Option<f64>,
    /// All Ritz values, ascending.
    pub eigenvalues: Vec<f64>,
    /// The lowest [`REPORTED`] Ritz pairs.
    pub states: Vec<RitzState>,
    /// The exact eigenvalue when one is known (`beta < 0`, `V = 0`, s-wave).
    pub closed_form_reference: Option<f64>,
}

impl SpectralResult {
    pub fn ground(&self) -> &RitzState {
        &self.states[0]
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// The quoted Ritz values; non-negative ones lie in the continuum.
    pub fn reported(&self) -> &[f64] {
        &self.eigenvalues[..self.eigenvalues.len().min(REPORTED)]
    }
}

/// Solves one sector on a fixed basis. For sector 0 the charge vector uses
/// scale `lambda` (ignored for other sectors and for Friedrichs).
pub fn solve_sector(
    beta: ExtensionParameter,
    potential: &Potential,
    basis: &RadialBasis,
    lambda: f64,
) -> Result<SpectralResult> {
    let swave = basis.sector == 0;
    let asm = if swave {
        assemble_swave(beta, potential, basis, lambda)?
    } else {
        assemble_sector(potential, basis)?
    };
    let (values, vectors) = generalized_eigen(&asm.form, &asm.norm)?;
    // sector units carry no 2 pi; rescale so that ||psi|| = 1 on the plane
    let unit = if swave {
        1.0
    } else {
        (2.0 * std::f64::consts::PI).sqrt().recip()
    };
    let n = basis.size;
    let states = (0..values.len().min(REPORTED))
        .map(|col| {
            let mut v: Vec<f64> = vectors.column(col).iter().map(|x| x * unit).collect();
            let lead = v
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if lead < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            let charge = asm.has_charge.then(|| v[n]);
            v.truncate(n);
            RitzState {
                energy: values[col],
                regular: v,
                charge,
            }
        })
        .collect();
    let closed_form_reference = match beta {
        ExtensionParameter::Finite(b) if swave && b < 0.0 && potential.is_zero() => {
            Some(closed_form_ground_energy(basis.order, b)?)
        }
        _ => None,
    };
    Ok(SpectralResult {
        sector: basis.sector,
        beta,
        basis: *basis,
        lambda_used: (swave && !beta.is_friedrichs()).then_some(lambda),
        eigenvalues: values,
        states,
        closed_form_reference,
    })
}

/// Change of the ground energy when the basis is doubled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceCheck {
    pub e0: f64,
    pub e0_doubled: f64,
    pub tolerance: f64,
    pub converged: bool,
}

/// `|E0(2N) - E0(N)| <= max(abs_floor, rel_tol |E0|)`. When both values are
/// nonnegative there is no point spectrum to converge: the lowest Ritz value
/// samples the continuum and the check passes.
pub fn convergence_check(
    result: &SpectralResult,
    potential: &Potential,
    abs_floor: f64,
    rel_tol: f64,
) -> Result<ConvergenceCheck> {
    let doubled = result.basis.resized(2 * result.basis.size)?;
    let lambda = result.lambda_used.unwrap_or(1.0);
    let fine = solve_sector(result.beta, potential, &doubled, lambda)?;
    let e0 = result.ground_energy();
    let e1 = fine.ground_energy();
    let tolerance = abs_floor.max(rel_tol * e0.abs());
    Ok(ConvergenceCheck {
        e0,
        e0_doubled: e1,
        tolerance,
        converged: (e0 >= 0.0 && e1 >= 0.0) || (e1 - e0).abs() <= tolerance,
    })
}

/// Settings for [`run_spectrum`]; `None` picks the documented defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumSettings {
    pub sector: i32,
    pub size: usize,
    pub scale: Option<f64>,
    pub lambda: Option<f64>,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self {
            sector: 0,
            size: 32,
            scale: None,
            lambda: None,
        }
    }
}

/// Solves with default scales where unspecified.
pub fn run_spectrum(
    order: Order,
    beta: ExtensionParameter,
    potential: &Potential,
    settings: SpectrumSettings,
) -> Result<SpectralResult> {
    let scale = settings.scale.unwrap_or_else(|| default_scale(order, beta));
    let lambda = settings
        .lambda
        .unwrap_or_else(|| default_lambda(order, beta));
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be > 0, got {lambda}")));
    }
    let basis = RadialBasis::new(order, settings.sector, settings.size, scale)?;
    solve_sector(beta, potential, &basis, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ord(a: f64) -> Order {
        Order::new(a).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        assert!((closed_form_ground_energy(ord(0.5), -PI * PI).unwrap() + 1.0).abs() < 1e-15);
        let e = closed_form_ground_energy(ord(0.5), -1.0).unwrap();
        assert!((e + PI.powi(-4)).abs() < 1e-17);
        let b = -c_alpha(ord(0.25)) * 16.0;
        let e = closed_form_ground_energy(ord(0.25), b).unwrap();
        assert!((e + 65536.0).abs() < 1e-9);
        assert!(closed_form_ground_energy(ord(0.5), 0.0).is_err());
        assert!(closed_form_ground_energy(ord(0.5), 1.0).is_err());
    }

    #[test]
    fn single_charge_vector() {
        // phi = 0, q = 1: Rayleigh quotient (beta + c - |G|^2)/|G|^2 at lambda = 1
        let basis = RadialBasis::new(ord(0.5), 0, 2, 1.0).unwrap();
        let asm = assemble_swave(
            ExtensionParameter::Finite(0.0),
            &Potential::zero(),
            &basis,
            1.0,
        )
        .unwrap();
        let n = 2;
        assert!((asm.form[(n, n)] - PI * PI / 2.0).abs() < 1e-13);
        assert!((asm.norm[(n, n)] - PI * PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn friedrichs_has_no_charge_row() {
        let basis = RadialBasis::new(ord(0.5), 0, 6, 1.0).unwrap();
        let asm = assemble_swave(
            ExtensionParameter::Friedrichs,
            &Potential::zero(),
            &basis,
            1.0,
        )
        .unwrap();
        assert_eq!(asm.form.nrows(), 6);
        assert!(!asm.has_charge);
        let res = solve_sector(
            ExtensionParameter::Friedrichs,
            &Potential::zero(),
            &basis,
            1.0,
        )
        .unwrap();
        assert!(res.ground().charge.is_none());
        assert!(res.lambda_used.is_none());
    }

    #[test]
    fn generalized_eigen_small() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (vals, vecs) = generalized_eigen(&a, &m).unwrap();
        for (k, &e) in vals.iter().enumerate() {
            let v = vecs.column(k);
            let r = &a * v - &m * v * e;
            assert!(r.amax() < 1e-13);
            assert!(((v.transpose() * &m * v)[(0, 0)] - 1.0).abs() < 1e-13);
        }
        assert!(vals[0] < vals[1]);
        assert!(generalized_eigen(&a, &(-m)).is_err());
    }

    #[test]
    fn wrong_sector_is_rejected() {
        let b1 = RadialBasis::new(ord(0.5), 1, 4, 1.0).unwrap();
        let b0 = RadialBasis::new(ord(0.5), 0, 4, 1.0).unwrap();
        assert!(assemble_swave(
            ExtensionParameter::Finite(1.0),
            &Potential::zero(),
            &b1,
            1.0
        )
        .is_err());
        assert!(assemble_sector(&Potential::zero(), &b0).is_err());
    }

    #[test]
    fn non_finite_matrices_are_rejected() {
        let mut a = DMatrix::identity(2, 2);
        a[(0, 0)] = f64::NAN;
        assert!(matches!(
            generalized_eigen(&a, &DMatrix::identity(2, 2)),
            Err(Error::LinearAlgebra(_))
        ));
    }
}
