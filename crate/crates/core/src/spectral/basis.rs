//! Weighted Laguerre basis for one angular sector.
//!
//! With `x = r/s` and `nu = |2k + alpha|` the basis functions are
//!
//! ```text
//! phi_i(r) = s^{-1} x^nu p_i(x) e^{-x/2},   i = 0..N-1,
//! ```
//!
//! where `p_i` are the generalized Laguerre polynomials of parameter
//! `2 nu + 1`, normalized so that `int r phi_i phi_j dr = delta_ij`. Every
//! element behaves as `r^nu` at the origin, so it lies in the Friedrichs form
//! domain of its sector. The kinetic matrix is exact: its integrand is a
//! polynomial against `x^{2 nu - 1} e^{-x}`, integrated by Gauss-Laguerre.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::specfun::{gamma_positive, Order};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialBasis {
    pub order: Order,
    /// Sector index `k` (angular momentum `2k`).
    pub sector: i32,
    pub size: usize,
    pub scale: f64,
}

/// Hashable identity of a basis, used to key cached integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisKey {
    alpha: u64,
    sector: i32,
    size: usize,
    scale: u64,
}

/// Orthonormal generalized Laguerre polynomials `p_0..p_{n-1}` of parameter
/// `a` at `x`, with first and second derivatives.
fn laguerre(a: f64, n: usize, x: f64, p: &mut [f64], dp: &mut [f64], d2p: &mut [f64]) {
    let c = |m: usize| ((m as f64) * (m as f64 + a)).sqrt();
    p[0] = 1.0 / gamma_positive(a + 1.0).sqrt();
    dp[0] = 0.0;
    d2p[0] = 0.0;
    for m in 0..n - 1 {
        let b = 2.0 * m as f64 + 1.0 + a - x;
        let (pm, dpm, d2pm) = if m == 0 {
            (0.0, 0.0, 0.0)
        } else {
            (p[m - 1], dp[m - 1], d2p[m - 1])
        };
        let cm = c(m);
        let cn = c(m + 1);
        p[m + 1] = (b * p[m] - cm * pm) / cn;
        dp[m + 1] = (b * dp[m] - p[m] - cm * dpm) / cn;
        d2p[m + 1] = (b * d2p[m] - 2.0 * dp[m] - cm * d2pm) / cn;
    }
}

/// Gauss-Laguerre rule for the weight `x^a e^{-x}` with `n` nodes.
///
/// Nodes come from the Jacobi matrix and are polished by Newton steps;
/// weights use the Christoffel form `1 / sum_j p_j(x)^2`, which keeps the
/// tiny outer weights relatively accurate.
pub fn gauss_laguerre(a: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(a > -1.0) || n == 0 {
        return Err(Error::Domain(format!(
            "Gauss-Laguerre needs a > -1 and n > 0 (a={a}, n={n})"
        )));
    }
    let jac = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * i as f64 + 1.0 + a
        } else if i + 1 == j || j + 1 == i {
            let m = i.max(j) as f64;
            (m * (m + a)).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jac)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    nodes.sort_by(f64::total_cmp);
    let mut p = vec![0.0; n + 1];
    let mut dp = vec![0.0; n + 1];
    let mut d2p = vec![0.0; n + 1];
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            laguerre(a, n + 1, *x, &mut p, &mut dp, &mut d2p);
            let step = p[n] / dp[n];
            if !step.is_finite() {
                break;
            }
            *x -= step;
        }
        laguerre(a, n + 1, *x, &mut p, &mut dp, &mut d2p);
        weights.push(1.0 / p[..n].iter().map(|v| v * v).sum::<f64>());
    }
    if nodes.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::LinearAlgebra(
            "Gauss-Laguerre nodes are not positive".into(),
        ));
    }
    Ok((nodes, weights))
}

/// Basis values at one radius: `phi_i`, `phi_i'` and the sector operator
/// `-phi_i'' - phi_i'/r + nu^2 phi_i / r^2`.
#[derive(Debug, Clone)]
pub struct BasisSample {
    pub value: Vec<f64>,
    pub deriv: Vec<f64>,
    pub operator: Vec<f64>,
}

impl RadialBasis {
    pub fn new(order: Order, sector: i32, size: usize, scale: f64) -> Result<Self> {
        if size < 2 {
            return Err(Error::Domain(format!(
                "basis size must be >= 2, got {size}"
            )));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Domain(format!(
                "basis scale must be > 0, got {scale}"
            )));
        }
        Ok(Self {
            order,
            sector,
            size,
            scale,
        })
    }

    /// Same family with a different number of functions.
    pub fn resized(&self, size: usize) -> Result<Self> {
        Self::new(self.order, self.sector, size, self.scale)
    }

    /// Centrifugal exponent `|2k + alpha|`.
    pub fn nu(&self) -> f64 {
        (2.0 * self.sector as f64 + self.order.alpha()).abs()
    }

    pub fn key(&self) -> BasisKey {
        BasisKey {
            alpha: self.order.alpha().to_bits(),
            sector: self.sector,
            size: self.size,
            scale: self.scale.to_bits(),
        }
    }

    /// Values, derivatives and operator action of every basis function at `r`.
    pub fn sample(&self, r: f64) -> BasisSample {
        let n = self.size;
        let nu = self.nu();
        let s = self.scale;
        let x = r / s;
        let mut p = vec![0.0; n];
        let mut dp = vec![0.0; n];
        let mut d2p = vec![0.0; n];
        laguerre(2.0 * nu + 1.0, n, x, &mut p, &mut dp, &mut d2p);
        let env = x.powf(nu) * (-0.5 * x).exp();
        let mut out = BasisSample {
            value: vec![0.0; n],
            deriv: vec![0.0; n],
            operator: vec![0.0; n],
        };
        for i in 0..n {
            out.value[i] = env * p[i] / s;
            out.deriv[i] = env * (nu * p[i] / x + dp[i] - 0.5 * p[i]) / (s * s);
            // with w = p e^{-x/2}: H (x^nu w) = -x^nu (w'' + (2 nu + 1) w' / x)
            let w1 = dp[i] - 0.5 * p[i];
            let w2 = d2p[i] - dp[i] + 0.25 * p[i];
            out.operator[i] = -env * (w2 + (2.0 * nu + 1.0) * w1 / x) / (s * s * s);
        }
        out
    }

    /// Basis values only, written into `out`.
    pub fn values_into(&self, r: f64, out: &mut [f64]) {
        let n = self.size;
        let nu = self.nu();
        let x = r / self.scale;
        let a = 2.0 * nu + 1.0;
        let env = x.powf(nu) * (-0.5 * x).exp() / self.scale;
        let mut prev = 0.0;
        let mut cur = 1.0 / gamma_positive(a + 1.0).sqrt();
        out[0] = env * cur;
        for m in 0..n - 1 {
            let mf = m as f64;
            let next = ((2.0 * mf + 1.0 + a - x) * cur - (mf * (mf + a)).sqrt() * prev)
                / ((mf + 1.0) * (mf + 1.0 + a)).sqrt();
            prev = cur;
            cur = next;
            out[m + 1] = env * cur;
        }
    }

    /// Sum of basis functions with coefficients `c` at `r`.
    pub fn combine(&self, c: &[f64], r: f64) -> f64 {
        let mut v = vec![0.0; self.size];
        self.values_into(r, &mut v);
        v.iter().zip(c).map(|(a, b)| a * b).sum()
    }

    /// `lim_{r -> 0} sum c_i phi_i(r) / r^nu`.
    pub fn origin_coefficient(&self, c: &[f64]) -> f64 {
        let n = self.size;
        let nu = self.nu();
        let (mut p, mut dp, mut d2p) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        laguerre(2.0 * nu + 1.0, n, 0.0, &mut p, &mut dp, &mut d2p);
        p.iter().zip(c).map(|(a, b)| a * b).sum::<f64>() / self.scale.powf(1.0 + nu)
    }

    /// Sector Gram matrix `int r phi_i phi_j dr`; the identity by construction.
    pub fn gram(&self) -> DMatrix<f64> {
        DMatrix::identity(self.size, self.size)
    }

    /// Sector kinetic matrix `int r (phi_i' phi_j' + nu^2 phi_i phi_j / r^2) dr`.
    pub fn kinetic(&self) -> Result<DMatrix<f64>> {
        let n = self.size;
        let nu = self.nu();
        let (xs, ws) = gauss_laguerre(2.0 * nu - 1.0, n + 2)?;
        let mut p = vec![0.0; n];
        let mut dp = vec![0.0; n];
        let mut d2p = vec![0.0; n];
        let mut q = vec![0.0; n];
        let mut k = DMatrix::zeros(n, n);
        for (&x, &w) in xs.iter().zip(&ws) {
            laguerre(2.0 * nu + 1.0, n, x, &mut p, &mut dp, &mut d2p);
            for i in 0..n {
                q[i] = nu * p[i] + x * dp[i] - 0.5 * x * p[i];
            }
            for i in 0..n {
                for j in 0..=i {
                    k[(i, j)] += w * (q[i] * q[j] + nu * nu * p[i] * p[j]);
                }
            }
        }
        let s2 = self.scale * self.scale;
        for i in 0..n {
            for j in 0..=i {
                let v = k[(i, j)] / s2;
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Ok(k)
    }

    /// Largest radius where the basis is not negligible.
    pub fn extent(&self) -> f64 {
        self.scale * (4.0 * self.size as f64 + 2.0 * self.nu() + 80.0)
    }

    /// Panel edges in `r` for composite quadrature of products of basis
    /// functions: geometric towards the origin, uniform in the bulk, split at
    /// `extra` radii.
    pub fn panel_edges(&self, extra: &[f64]) -> Vec<f64> {
        let s = self.scale;
        let mut edges = vec![0.0];
        let mut x = 1e-12;
        while x < 1.0 {
            edges.push(x * s);
            x *= 10.0;
        }
        let top = self.extent() / s;
        let mut x = 1.0;
        while x < top {
            edges.push(x * s);
            x += 2.0;
        }
        edges.push(top * s);
        edges.extend(extra.iter().copied().filter(|&r| r > 0.0 && r < top * s));
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1e-300));
        edges
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_vector;

    fn basis(a: f64, k: i32, n: usize, s: f64) -> RadialBasis {
        RadialBasis::new(Order::new(a).unwrap(), k, n, s).unwrap()
    }

    #[test]
    fn gauss_laguerre_moments() {
        for &a in &[-0.9, -0.5, 0.0, 0.4, 3.0] {
            let (x, w) = gauss_laguerre(a, 12).unwrap();
            for m in 0..20 {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(m)).sum();
                let exact = gamma_positive(a + 1.0 + m as f64);
                assert!(
                    ((q - exact) / exact).abs() < 1e-12,
                    "a={a} m={m}: {q} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn gram_is_identity_by_quadrature() {
        for (a, k, n, s) in [(0.3, 0, 12, 1.0), (0.5, 1, 8, 2.5), (0.8, -1, 10, 0.3)] {
            let b = basis(a, k, n, s);
            let mut vals = vec![0.0; n];
            let res = integrate_vector(
                |r, out| {
                    b.values_into(r, &mut vals);
                    let mut idx = 0;
                    for i in 0..n {
                        for j in 0..=i {
                            out[idx] = r * vals[i] * vals[j];
                            idx += 1;
                        }
                    }
                },
                n * (n + 1) / 2,
                &b.panel_edges(&[]),
                1e-13,
                3,
            );
            assert!(res.converged);
            let mut idx = 0;
            for i in 0..n {
                for j in 0..=i {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (res.values[idx] - e).abs() < 1e-12,
                        "({i},{j}) {}",
                        res.values[idx]
                    );
                    idx += 1;
                }
            }
        }
    }

    /// The kinetic integrand behaves as `r^{2 nu - 1}`, so the oracle needs
    /// geometric panels much closer to the origin than the default layout.
    fn fine_edges(b: &RadialBasis) -> Vec<f64> {
        let mut edges = vec![0.0];
        let mut x = 1e-40;
        while x < 1e-12 {
            edges.push(x * b.scale);
            x *= 10.0;
        }
        edges.extend(b.panel_edges(&[]).into_iter().skip(1));
        edges
    }

    #[test]
    fn kinetic_matches_composite_quadrature() {
        for (a, k, n, s) in [(0.3, 0, 10, 1.0), (0.5, 1, 8, 2.0), (0.7, 0, 16, 0.5)] {
            let b = basis(a, k, n, s);
            let kin = b.kinetic().unwrap();
            let nu = b.nu();
            let res = integrate_vector(
                |r, out| {
                    let smp = b.sample(r);
                    let mut idx = 0;
                    for i in 0..n {
                        for j in 0..=i {
                            out[idx] = r
                                * (smp.deriv[i] * smp.deriv[j]
                                    + nu * nu * smp.value[i] * smp.value[j] / (r * r));
                            idx += 1;
                        }
                    }
                },
                n * (n + 1) / 2,
                &fine_edges(&b),
                1e-12,
                4,
            );
            let scale = kin.amax();
            let mut idx = 0;
            for i in 0..n {
                for j in 0..=i {
                    assert!(
                        (res.values[idx] - kin[(i, j)]).abs() < 1e-10 * scale,
                        "({i},{j})"
                    );
                    idx += 1;
                }
            }
        }
    }

    #[test]
    fn operator_is_consistent_with_kinetic() {
        // int r phi_i (H phi_j) dr equals the kinetic matrix (no boundary terms for nu > 0)
        let b = basis(0.6, 0, 6, 1.3);
        let kin = b.kinetic().unwrap();
        let n = b.size;
        let res = integrate_vector(
            |r, out| {
                let smp = b.sample(r);
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = r * smp.value[i] * smp.operator[j];
                    }
                }
            },
            n * n,
            &fine_edges(&b),
            1e-11,
            4,
        );
        for i in 0..n {
            for j in 0..n {
                assert!(
                    (res.values[i * n + j] - kin[(i, j)]).abs() < 1e-8 * kin.amax(),
                    "({i},{j})"
                );
            }
        }
    }

    #[test]
    fn values_agree_with_sample() {
        let b = basis(0.4, 2, 7, 0.8);
        let mut v = vec![0.0; 7];
        for &r in &[1e-3, 0.5, 3.0, 20.0] {
            b.values_into(r, &mut v);
            let smp = b.sample(r);
            for (a, b) in v.iter().zip(&smp.value) {
                assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let o = Order::new(0.5).unwrap();
        assert!(RadialBasis::new(o, 0, 1, 1.0).is_err());
        assert!(RadialBasis::new(o, 0, 4, 0.0).is_err());
        assert!(gauss_laguerre(-1.0, 4).is_err());
    }
}
