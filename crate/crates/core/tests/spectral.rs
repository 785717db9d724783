use std::f64::consts::PI;

use anyons::forms::{lower_bound, ExtensionParameter};
use anyons::potentials::{Potential, PotentialSpec};
use anyons::spectral::{
    assemble_swave, closed_form_ground_energy, convergence_check, eigenfunction_residual,
    extract_charge_condition, fit_boundary, interacting_charge_term, run_spectrum, solve_sector,
    RadialBasis, SpectrumSettings,
};
use anyons::Order;
use rand::{Rng, SeedableRng};

fn ord(a: f64) -> Order {
    Order::new(a).unwrap()
}

fn fin(b: f64) -> ExtensionParameter {
    ExtensionParameter::Finite(b)
}

fn settings(size: usize, scale: Option<f64>, lambda: Option<f64>) -> SpectrumSettings {
    SpectrumSettings {
        size,
        scale,
        lambda,
        ..Default::default()
    }
}

#[test]
fn ground_energy_converges_to_closed_form() {
    let zero = Potential::zero();
    for lambda in [1.0, 1.3] {
        let r = run_spectrum(
            ord(0.5),
            fin(-PI * PI),
            &zero,
            settings(24, Some(1.0), Some(lambda)),
        )
        .unwrap();
        assert!(
            (r.ground_energy() + 1.0).abs() < 1e-6,
            "lambda {lambda}: {}",
            r.ground_energy()
        );
        assert_eq!(r.closed_form_reference, Some(-1.0));
    }
}

#[test]
fn ritz_values_decrease_with_basis_size() {
    let zero = Potential::zero();
    let well = Potential::new(PotentialSpec::finite_well(1.0, 1.0)).unwrap();
    for (order, beta, v) in [
        (0.25, -1.0, &zero),
        (0.75, -20.0, &zero),
        (0.5, -1.0, &well),
        (0.5, 2.0, &well),
    ] {
        let mut last = f64::INFINITY;
        for n in [8, 16, 24, 32] {
            let e = run_spectrum(ord(order), fin(beta), v, settings(n, None, None))
                .unwrap()
                .ground_energy();
            assert!(
                e <= last + 1e-12 * e.abs(),
                "alpha {order} beta {beta} N {n}: {e} > {last}"
            );
            last = e;
        }
    }
}

#[test]
fn spectrum_respects_the_floor() {
    let well = Potential::new(PotentialSpec::finite_well(2.0, 0.5)).unwrap();
    let gauss = Potential::new(PotentialSpec::gaussian(-1.5, 1.0)).unwrap();
    for alpha in [0.25, 0.5, 0.75] {
        for beta in [-20.0, -1.0, 0.0, 5.0] {
            for v in [Potential::zero(), well.clone(), gauss.clone()] {
                let r = run_spectrum(ord(alpha), fin(beta), &v, settings(16, None, None)).unwrap();
                let bound = lower_bound(ord(alpha), fin(beta), v.v0());
                assert!(r.ground_energy() >= bound - 1e-9 * (1.0 + bound.abs()));
            }
        }
    }
}

#[test]
fn no_bound_state_for_nonnegative_beta() {
    for beta in [0.0, 1.0, 10.0] {
        let r = run_spectrum(
            ord(0.5),
            fin(beta),
            &Potential::zero(),
            settings(32, None, None),
        )
        .unwrap();
        assert!(r.eigenvalues[0] >= -1e-9, "{}", r.eigenvalues[0]);
        assert!(r.closed_form_reference.is_none());
    }
}

#[test]
fn ground_energy_is_monotone_in_beta() {
    let basis = RadialBasis::new(ord(0.4), 0, 16, 1.0).unwrap();
    for v in [
        Potential::zero(),
        Potential::new(PotentialSpec::finite_well(3.0, 1.0)).unwrap(),
    ] {
        let mut last = f64::NEG_INFINITY;
        for beta in [-50.0, -10.0, -1.0, 0.0, 1.0, 10.0, 100.0] {
            let e = solve_sector(fin(beta), &v, &basis, 1.0)
                .unwrap()
                .ground_energy();
            assert!(e >= last, "beta {beta}: {e} < {last}");
            last = e;
        }
    }
}

#[test]
fn higher_sectors_ignore_beta() {
    let basis = RadialBasis::new(ord(0.5), 1, 16, 1.0).unwrap();
    let zero = Potential::zero();
    let reference = solve_sector(fin(-5.0), &zero, &basis, 1.0).unwrap();
    assert!(reference.eigenvalues.iter().all(|&e| e >= 0.0));
    assert!(reference.states.iter().all(|s| s.charge.is_none()));
    for beta in [fin(0.0), fin(5.0), ExtensionParameter::Friedrichs] {
        let r = solve_sector(beta, &zero, &basis, 1.0).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&r.eigenvalues), bits(&reference.eigenvalues));
    }
}

#[test]
fn single_bound_state() {
    for (alpha, beta) in [(0.25, -1.0), (0.5, -PI * PI), (0.75, -20.0)] {
        let r = run_spectrum(
            ord(alpha),
            fin(beta),
            &Potential::zero(),
            settings(32, None, None),
        )
        .unwrap();
        let below = r.eigenvalues.iter().filter(|&&e| e < -1e-6).count();
        assert_eq!(below, 1, "alpha {alpha} beta {beta}: {:?}", r.reported());
    }
}

#[test]
fn friedrichs_limits() {
    let basis = RadialBasis::new(ord(0.5), 0, 24, 1.0).unwrap();
    let zero = Potential::zero();
    let e_f = solve_sector(ExtensionParameter::Friedrichs, &zero, &basis, 1.0)
        .unwrap()
        .ground_energy();
    // for beta < 0 the lowest state is the bound state; the next one tends to the Friedrichs ground state
    for (sign, index) in [(1.0, 0), (-1.0, 1)] {
        let mut last_q = f64::INFINITY;
        let mut last_gap = f64::INFINITY;
        for beta in [1e2, 1e4, 1e6] {
            let r = solve_sector(fin(sign * beta), &zero, &basis, 1.0).unwrap();
            let st = &r.states[index];
            let q = st.charge.unwrap().abs();
            let gap = (st.energy - e_f).abs();
            assert!(
                q * 10.0 <= last_q,
                "beta {}: |q| {q} after {last_q}",
                sign * beta
            );
            assert!(gap <= last_gap);
            last_q = q;
            last_gap = gap;
        }
        assert!(last_gap <= 1e-4);
    }
}

#[test]
fn friedrichs_run_has_no_charge() {
    let r = run_spectrum(
        ord(0.5),
        ExtensionParameter::Friedrichs,
        &Potential::zero(),
        settings(16, None, None),
    )
    .unwrap();
    assert!(r.states.iter().all(|s| s.charge.is_none()));
    assert!(r.lambda_used.is_none());
    assert!(r.ground_energy() >= 0.0);
}

#[test]
fn assembled_matrices_are_symmetric() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let v = Potential::new(PotentialSpec::gaussian(-2.0, 0.8)).unwrap();
    for _ in 0..10 {
        let alpha = rng.random_range(0.1..0.9);
        let n = rng.random_range(2..20);
        let basis = RadialBasis::new(ord(alpha), 0, n, rng.random_range(0.3..3.0)).unwrap();
        let asm = assemble_swave(
            fin(rng.random_range(-10.0..10.0)),
            &v,
            &basis,
            rng.random_range(0.3..3.0),
        )
        .unwrap();
        for m in [&asm.form, &asm.norm] {
            let asym = (m - m.transpose()).amax();
            assert!(asym <= 1e-12 * m.amax(), "{asym}");
        }
    }
}

#[test]
fn pure_defect_eigenfunction() {
    let r = run_spectrum(
        ord(0.5),
        fin(-PI * PI),
        &Potential::zero(),
        settings(24, Some(1.0), Some(1.0)),
    )
    .unwrap();
    assert!((r.ground_energy() + 1.0).abs() < 1e-12);
    let report = extract_charge_condition(&r, &Potential::zero(), 0).unwrap();
    assert!(report.degenerate);
    assert!(
        report.d_fit.abs() <= 1e-6 && report.d_exact.abs() <= 1e-6,
        "{report:?}"
    );
    assert!(report.charge.abs() > 0.1);
    assert!((report.boundary.exponent + 0.5).abs() < 1e-2);
    assert!(eigenfunction_residual(&r, &Potential::zero(), 0).unwrap() <= 1e-8);
}

#[test]
fn charge_ratio_is_stable_in_lambda() {
    let zero = Potential::zero();
    let ratios: Vec<f64> = [1.5, 2.0, 3.0]
        .iter()
        .map(|&l| {
            let r = run_spectrum(
                ord(0.5),
                fin(-PI * PI),
                &zero,
                settings(32, Some(1.0), Some(l)),
            )
            .unwrap();
            let rep = extract_charge_condition(&r, &zero, 0).unwrap();
            assert!(!rep.degenerate);
            assert!(
                (rep.ratio_to_predicted.unwrap() - 1.0).abs() < 1e-3,
                "{rep:?}"
            );
            rep.ratio_to_printed.unwrap()
        })
        .collect();
    for r in &ratios {
        assert!((r - ratios[0]).abs() < 1e-3 * ratios[0].abs(), "{ratios:?}");
    }
}

#[test]
fn charge_extraction_needs_a_charge() {
    let r = run_spectrum(
        ord(0.5),
        ExtensionParameter::Friedrichs,
        &Potential::zero(),
        settings(8, None, None),
    )
    .unwrap();
    assert!(extract_charge_condition(&r, &Potential::zero(), 0).is_err());
}

#[test]
fn residual_shrinks_with_basis_size() {
    let zero = Potential::zero();
    let res = |n| {
        let r = run_spectrum(
            ord(0.5),
            fin(-PI * PI),
            &zero,
            settings(n, Some(1.0), Some(2.0)),
        )
        .unwrap();
        eigenfunction_residual(&r, &zero, 0).unwrap()
    };
    let (coarse, fine) = (res(3), res(24));
    assert!(coarse >= 10.0 * fine, "{coarse} {fine}");
    assert!(fine <= 1e-4, "{fine}");
}

#[test]
fn interacting_term_vanishes_without_potential() {
    let v = Potential::new(PotentialSpec::finite_well(1.0, 1.0)).unwrap();
    let a = run_spectrum(ord(0.5), fin(-1.0), &v, settings(16, Some(1.0), Some(1.0))).unwrap();
    let t = interacting_charge_term(&a, &v, 0).unwrap();
    assert!(t.is_finite() && t != 0.0);
    assert_eq!(
        interacting_charge_term(&a, &Potential::zero(), 0).unwrap(),
        0.0
    );
}

#[test]
fn zero_potential_runs_are_bit_identical() {
    let free = run_spectrum(
        ord(0.5),
        fin(-1.0),
        &Potential::zero(),
        settings(16, None, None),
    )
    .unwrap();
    let spec = PotentialSpec::parse("zero").unwrap();
    let again = run_spectrum(
        ord(0.5),
        fin(-1.0),
        &Potential::new(spec).unwrap(),
        settings(16, None, None),
    )
    .unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&free.eigenvalues), bits(&again.eigenvalues));
}

#[test]
fn convergence_check_accepts_the_free_run() {
    let zero = Potential::zero();
    let r = run_spectrum(ord(0.5), fin(-PI * PI), &zero, settings(32, None, None)).unwrap();
    assert!(convergence_check(&r, &zero, 1e-8, 1e-6).unwrap().converged);
    let e = closed_form_ground_energy(ord(0.5), -PI * PI).unwrap();
    assert!((r.ground_energy() - e).abs() < 1e-6);
}

#[test]
fn boundary_fit_of_a_defect_function() {
    let g = anyons::defect::DefectFunction::new(ord(0.3), 2.0).unwrap();
    let f = fit_boundary(|r| g.eval(r).unwrap(), ord(0.3), (1e-4, 1e-2)).unwrap();
    assert!((f.exponent + 0.3).abs() < 1e-2, "{f:?}");
}
