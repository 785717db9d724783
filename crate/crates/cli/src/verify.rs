//! Verification suites: one line per check, deterministic for a given seed.

use std::f64::consts::PI;
use std::io::Write;

use anyons::defect::{
    c_alpha, c_alpha_quadrature, cross_gram, cross_gram_quadrature, DefectFunction,
};
use anyons::forms::{
    extension_form, extension_form_terms, lambda_invariance_check, lower_bound, potential_energy,
    ExtensionParameter, FormDecomposition, RadialProfile,
};
use anyons::potentials::{Potential, PotentialSpec};
use anyons::specfun::{bessel_i, bessel_i_prime, bessel_k, bessel_k_prime, gamma};
use anyons::spectral::{
    closed_form_ground_energy, extract_charge_condition, run_spectrum, solve_sector, RadialBasis,
    SpectrumSettings,
};
use anyons::{Order, Result};
use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::IdentityCheck;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Identities,
    Forms,
    Spectrum,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

const ALPHAS: [f64; 3] = [0.25, 0.5, 0.75];

fn ord(a: f64) -> Order {
    Order::new(a).expect("suite orders are valid")
}

fn fin(b: f64) -> ExtensionParameter {
    ExtensionParameter::Finite(b)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn flag(ok: bool) -> f64 {
    if ok {
        0.0
    } else {
        1.0
    }
}

fn identities(out: &mut Vec<IdentityCheck>) -> Result<()> {
    out.push(IdentityCheck::new(
        "gamma(1/2) = sqrt(pi)",
        rel(gamma(0.5)?, PI.sqrt()),
        1e-13,
    ));

    let half = ord(0.5);
    let mut worst = 0.0f64;
    let mut x = 1e-4;
    while x <= 30.0 {
        worst = worst.max(rel(
            bessel_k(half, x)?.value,
            (PI / (2.0 * x)).sqrt() * (-x).exp(),
        ));
        x *= 1.1;
    }
    out.push(IdentityCheck::new(
        "K_1/2 closed form on [1e-4, 30]",
        worst,
        1e-12,
    ));

    let mut wronskian = 0.0f64;
    let mut small_x = 0.0f64;
    for alpha in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let o = ord(alpha);
        for x in [0.01, 0.5, 2.0, 7.5, 12.0] {
            let w = bessel_i(o, x)? * bessel_k_prime(o, x)?.value
                - bessel_i_prime(o, x)? * bessel_k(o, x)?.value;
            wronskian = wronskian.max(rel(w, -1.0 / x));
        }
    }
    // the next term is relative (x/2)^{2a} Gamma(1-a)/Gamma(1+a), below 1e-4 only for a >= 0.4
    for alpha in [0.4, 0.5, 0.7, 0.9] {
        let lim = 2f64.powf(alpha - 1.0) * gamma(alpha)?;
        small_x = small_x.max(rel(
            1e-6f64.powf(alpha) * bessel_k(ord(alpha), 1e-6)?.value,
            lim,
        ));
    }
    out.push(IdentityCheck::new(
        "Wronskian I K' - I' K = -1/x",
        wronskian,
        1e-9,
    ));
    out.push(IdentityCheck::new(
        "small-x law x^a K_a(x) at 1e-6, alpha >= 0.4",
        small_x,
        1e-4,
    ));

    let mut worst = 0.0f64;
    for i in 1..=9 {
        let o = ord(i as f64 / 10.0);
        worst = worst.max(rel(c_alpha_quadrature(o)?, c_alpha(o)));
    }
    out.push(IdentityCheck::new(
        "c_alpha quadrature, 9 orders",
        worst,
        1e-8,
    ));

    let grid = [0.5, 1.0, 1.7, 2.5, 4.0];
    let (mut worst, mut positive) = (0.0f64, true);
    for alpha in ALPHAS {
        for &l1 in &grid {
            for &l2 in grid.iter().filter(|&&l| l != l1) {
                let closed = cross_gram(ord(alpha), l1, l2)?;
                positive &= closed > 0.0;
                worst = worst.max(rel(closed, cross_gram_quadrature(ord(alpha), l1, l2)?));
            }
        }
    }
    out.push(IdentityCheck::new(
        "cross-Gram closed form vs quadrature",
        worst,
        1e-8,
    ));
    out.push(IdentityCheck::new(
        "cross-Gram positive (sign c(l1^2a - l2^2a)/(l1^2 - l2^2))",
        flag(positive),
        0.0,
    ));

    let mut worst = 0.0f64;
    for (alpha, lambda, r) in [(0.5, 1.0, 1.0), (0.3, 2.0, 0.5), (0.8, 0.7, 3.0)] {
        let res = DefectFunction::new(ord(alpha), lambda)?.ode_residual(r)?;
        worst = worst.max(res.residual.abs() / res.magnitude);
    }
    out.push(IdentityCheck::new("defect ODE residual", worst, 1e-8));
    Ok(())
}

fn forms(out: &mut Vec<IdentityCheck>, rng: &mut ChaCha8Rng) -> Result<()> {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let alpha = rng.random_range(0.1..0.9);
        let beta = rng.random_range(-20.0..20.0);
        let (a, b, q): (f64, f64, f64) = (
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        let lambda: f64 = rng.random_range(0.5..4.0);
        let lambda_alt = rng.random_range(0.5..4.0);
        if (lambda - lambda_alt).abs() < 1e-3 {
            continue;
        }
        let phi = RadialProfile::analytic(
            move |r: f64| {
                let e = (-r).exp();
                let p = r.powf(alpha);
                (
                    (a + b * r) * p * e,
                    (a * alpha / r + b * (alpha + 1.0) - a - b * r) * p * e,
                )
            },
            1.0,
        );
        let d = FormDecomposition::new(ord(alpha), phi, q, lambda)?;
        worst = worst.max(lambda_invariance_check(&d, fin(beta), lambda_alt)?.relative_difference);
    }
    out.push(IdentityCheck::new(
        "lambda invariance, 50 random states",
        worst,
        1e-7,
    ));

    let well = Potential::new(PotentialSpec::finite_well(2.0, 1.0))?;
    let mut worst = f64::NEG_INFINITY;
    for alpha in ALPHAS {
        let basis = RadialBasis::new(ord(alpha), 0, 6, 1.0)?;
        for beta in [-30.0, -3.0, -0.1, 0.0, 10.0] {
            for v in [Potential::zero(), well.clone()] {
                let bound = lower_bound(ord(alpha), fin(beta), v.v0());
                for _ in 0..200 {
                    let c: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let q = rng.random_range(-2.0..2.0);
                    let lambda = [0.5, 1.0, 2.5][rng.random_range(0..3)];
                    let d = FormDecomposition::new(
                        ord(alpha),
                        RadialProfile::basis(basis, c)?,
                        q,
                        lambda,
                    )?;
                    let t = extension_form_terms(&d, fin(beta))?;
                    let quotient = (t.value() + potential_energy(&d.regular, &v)?) / t.psi_norm_sq;
                    worst = worst.max((bound - quotient) / (1.0 + bound.abs()));
                }
            }
        }
    }
    out.push(IdentityCheck::new(
        "Rayleigh quotients above the lower bound",
        worst.max(0.0),
        1e-9,
    ));

    let sqrt_exp = RadialProfile::analytic(
        |r: f64| {
            (
                r.sqrt() * (-r).exp(),
                (0.5 / r.sqrt() - r.sqrt()) * (-r).exp(),
            )
        },
        1.0,
    );
    let d = FormDecomposition::new(ord(0.5), sqrt_exp.clone(), 0.0, 1.0)?;
    let same = extension_form(&d, fin(3.0))?.to_bits()
        == extension_form(&d, ExtensionParameter::Friedrichs)?.to_bits();
    out.push(IdentityCheck::new(
        "q = 0 reduces to the Friedrichs form",
        flag(same),
        0.0,
    ));
    let d = FormDecomposition::new(ord(0.5), sqrt_exp, 0.7, 1.0)?;
    let shift = extension_form(&d, fin(5.0))? - extension_form(&d, fin(-5.0))?;
    out.push(IdentityCheck::new(
        "beta enters as beta |q|^2",
        rel(shift, 10.0 * 0.49),
        1e-12,
    ));
    let pure = FormDecomposition::new(ord(0.5), RadialProfile::zero(), 1.0, 1.0)?;
    out.push(IdentityCheck::new(
        "pure charge form = pi^2/2",
        rel(extension_form(&pure, fin(0.0))?, PI * PI / 2.0),
        1e-12,
    ));
    Ok(())
}

fn spectrum(out: &mut Vec<IdentityCheck>) -> Result<()> {
    let zero = Potential::zero();
    let defaults = SpectrumSettings::default();
    let mut worst = 0.0f64;
    let mut floor_ok = true;
    for alpha in ALPHAS {
        for beta in [-0.5, -1.0, -PI * PI, -20.0] {
            let r = run_spectrum(ord(alpha), fin(beta), &zero, defaults)?;
            worst = worst.max(rel(
                r.ground_energy(),
                closed_form_ground_energy(ord(alpha), beta)?,
            ));
            floor_ok &= r.ground_energy() >= lower_bound(ord(alpha), fin(beta), 0.0) * (1.0 + 1e-9);
            let below = r.eigenvalues.iter().filter(|&&e| e < -1e-6).count();
            floor_ok &= below == 1;
        }
    }
    out.push(IdentityCheck::new(
        "beta < 0 eigenvalue reproduction, N = 32",
        worst,
        1e-6,
    ));
    out.push(IdentityCheck::new(
        "single bound state above the floor",
        flag(floor_ok),
        0.0,
    ));

    let mut lowest = f64::INFINITY;
    for alpha in ALPHAS {
        for beta in [0.0, 1.0, 10.0] {
            lowest =
                lowest.min(run_spectrum(ord(alpha), fin(beta), &zero, defaults)?.eigenvalues[0]);
        }
    }
    out.push(IdentityCheck::new(
        "no negative Ritz value for beta >= 0",
        (-lowest).max(0.0),
        1e-9,
    ));

    let k1 = RadialBasis::new(ord(0.5), 1, 32, 1.0)?;
    let bits = |b: f64| -> Result<Vec<u64>> {
        Ok(solve_sector(fin(b), &zero, &k1, 1.0)?
            .eigenvalues
            .iter()
            .map(|e| e.to_bits())
            .collect())
    };
    let same = bits(-5.0)? == bits(0.0)? && bits(0.0)? == bits(5.0)?;
    out.push(IdentityCheck::new(
        "k = 1 spectrum independent of beta",
        flag(same),
        0.0,
    ));

    let basis = RadialBasis::new(ord(0.5), 0, 24, 1.0)?;
    let e_f = solve_sector(ExtensionParameter::Friedrichs, &zero, &basis, 1.0)?.ground_energy();
    let mut ratio_ok = true;
    let mut gap = 0.0f64;
    for (sign, index) in [(1.0, 0usize), (-1.0, 1usize)] {
        let mut last = f64::INFINITY;
        for beta in [1e2, 1e4, 1e6] {
            let st = solve_sector(fin(sign * beta), &zero, &basis, 1.0)?.states[index].clone();
            let q = st.charge.unwrap_or(f64::NAN).abs();
            ratio_ok &= q * 10.0 <= last;
            last = q;
            gap = gap.max((st.energy - e_f).abs() * f64::from(u8::from(beta == 1e6)));
        }
    }
    out.push(IdentityCheck::new(
        "Friedrichs limit |q| drops 10x per step",
        flag(ratio_ok),
        0.0,
    ));
    out.push(IdentityCheck::new(
        "Friedrichs limit |E0 - E_F| at |beta| = 1e6",
        gap,
        1e-4,
    ));

    let exact = SpectrumSettings {
        scale: Some(1.0),
        lambda: Some(1.0),
        ..defaults
    };
    let r = run_spectrum(ord(0.5), fin(-PI * PI), &zero, exact)?;
    let rep = extract_charge_condition(&r, &zero, 0)?;
    out.push(IdentityCheck::new(
        "boundary exponent of G_1 (alpha = 1/2)",
        (rep.boundary.exponent + 0.5).abs(),
        1e-2,
    ));
    out.push(IdentityCheck::new(
        "regular coefficient of G_1 eigenfunction",
        rep.d_fit.abs(),
        1e-6,
    ));

    let well = Potential::new(PotentialSpec::finite_well(1.0, 1.0))?;
    let e = run_spectrum(ord(0.5), fin(-1.0), &well, defaults)?.ground_energy();
    let free = run_spectrum(ord(0.5), fin(-1.0), &zero, defaults)?.ground_energy();
    let bound = lower_bound(ord(0.5), fin(-1.0), 1.0);
    out.push(IdentityCheck::new(
        "well: bound <= E0 <= free E0",
        flag(e <= free && e >= bound),
        0.0,
    ));
    Ok(())
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<IdentityCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    if matches!(suite, Suite::Identities | Suite::All) {
        identities(&mut checks)?;
    }
    if matches!(suite, Suite::Forms | Suite::All) {
        forms(&mut checks, &mut rng)?;
    }
    if matches!(suite, Suite::Spectrum | Suite::All) {
        spectrum(&mut checks)?;
    }
    Ok(checks)
}

pub fn verify(args: &VerifyArgs, out: &mut impl Write) -> CliResult<()> {
    let checks = run_suite(args.suite, args.seed)?;
    let mut failed = 0;
    for c in &checks {
        failed += usize::from(!c.pass);
        writeln!(
            out,
            "{:<60} measured={:<12.4e} bound={:<10.1e} {}",
            c.name,
            c.measured,
            c.bound,
            if c.pass { "PASS" } else { "FAIL" }
        )?;
    }
    writeln!(
        out,
        "{} of {} checks passed",
        checks.len() - failed,
        checks.len()
    )?;
    if failed > 0 {
        return Err(CliError::Verification {
            failed,
            total: checks.len(),
        });
    }
    Ok(())
}
