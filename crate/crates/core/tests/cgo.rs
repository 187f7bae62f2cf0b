use std::f64::consts::PI;

use calderon_core::cgo::*;
use calderon_core::sigma::{build_domain_and_cutoff, build_sigma_uniform, Region, SigmaSet};
use calderon_core::*;
use num_complex::Complex64;

fn cube3() -> (Lattice, SigmaSet, Domain) {
    let l = Lattice::new(3, 10).unwrap();
    let sigma = build_sigma_uniform(l);
    let region = Region::cube(3, 0.3, 0.5);
    let dom = build_domain_and_cutoff(l, &sigma, &region, 1).unwrap();
    (l, sigma, dom)
}

fn wave(dom: &Domain, sigma: &SigmaSet) -> ComplexField {
    let interior = dom.w.interior(sigma.directions());
    ComplexField::from_fn(interior, |x| Complex64::new((5.0 * x[0]).cos() + x[2], x[1]))
}

fn l2(f: &ComplexField) -> f64 {
    f.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn hyperbolic_defect_example() {
    let l = Lattice::new(2, 20).unwrap();
    let sigma = build_sigma_uniform(l);
    let eta = [Complex64::new(2.0, 0.0), Complex64::new(0.0, 2.0)];
    assert!((harmonic_defect(&eta, &sigma).unwrap() - 6.67e-3).abs() < 1e-4);
    let (sum, _) = discrete_harmonic_defect(&eta, l.h());
    assert!(sum.norm() > 0.0);
    assert!(CgoPhase::new(eta.to_vec()).is_ok());
    assert!(CgoPhase::discrete_harmonic(eta.to_vec(), l.h()).is_err());
}

#[test]
fn exact_phase_is_discrete_harmonic() {
    let l = Lattice::new(3, 12).unwrap();
    let sigma = build_sigma_uniform(l);
    let phase = exact_harmonic_phase(3, l.h(), 9.0, 2, 0).unwrap();
    assert_eq!(phase.kind, PhaseKind::DiscreteHarmonic);
    assert!(harmonic_defect(&phase.eta, &sigma).unwrap() < 1e-10 * phase.norm().powi(2));
    let limit = exact_phase_limit(&l);
    assert!(exact_harmonic_phase(3, l.h(), 0.99 * limit, 0, 1).is_ok());
    assert!(matches!(exact_harmonic_phase(3, l.h(), 1.01 * limit, 0, 1), Err(Error::OutOfRange(_))));
    assert!(exact_harmonic_phase(3, l.h(), 1.0, 1, 1).is_err());
}

#[test]
fn zero_forcing_gives_zero() {
    let (_, sigma, dom) = cube3();
    let q = Potential::zero(dom.w.clone(), &sigma).unwrap();
    let f = ComplexField::zeros(dom.w.interior(sigma.directions()));
    let sol = aux_solve(&f, &q, &[8.0, 0.0, 0.0], &sigma, &dom).unwrap();
    assert_eq!(sol.u.max_abs(), 0.0);
}

#[test]
fn auxiliary_solve_is_accurate() {
    let (_, sigma, dom) = cube3();
    let interior = dom.w.interior(sigma.directions());
    let qv = ScalarField::from_fn(interior, |x| 3.0 * (x[0] - x[1]));
    let q = Potential::new(dom.w.clone(), qv, 3.0, &sigma).unwrap();
    let f = wave(&dom, &sigma);
    let sol = aux_solve(&f, &q, &[0.0, 8.0 * 0.6, 8.0 * 0.8], &sigma, &dom).unwrap();
    assert!(sol.residual <= 1e-9, "{}", sol.residual);
    assert!(sol.sigma_min > 0.0);
    assert!(sol.u_b.len() >= sol.u.len());
}

#[test]
fn scaled_auxiliary_solution_stays_bounded() {
    let (_, sigma, dom) = cube3();
    let q = Potential::zero(dom.w.clone(), &sigma).unwrap();
    let f = wave(&dom, &sigma);
    let ratios: Vec<f64> = [4.0, 8.0, 16.0]
        .iter()
        .map(|&s| {
            let sol = aux_solve(&f, &q, &[s, 0.0, 0.0], &sigma, &dom).unwrap();
            s * l2(&sol.u) / l2(&f)
        })
        .collect();
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi / lo < 4.0, "{ratios:?}");
}

#[test]
fn solution_factorizes_through_the_exponential() {
    let (_, sigma, dom) = cube3();
    let interior = dom.w.interior(sigma.directions());
    let qv = ScalarField::from_fn(interior, |x| 2.0 * (PI * x[2]).cos());
    let q = Potential::new(dom.w.clone(), qv, 2.0, &sigma).unwrap();
    let phase = CgoPhase::from_parts(&[6.0, 0.0, 0.0], &[0.0, 6.0, 0.0]).unwrap();
    let sol = cgo_solve(&q, &phase, &sigma, &dom).unwrap();
    assert!(sol.identity_gap() < 1e-12);
    assert!(sol.diagnostics.residual <= 1e-9, "{}", sol.diagnostics.residual);
    assert!(sol.r_tilde.max_abs() > 0.0);
    assert_eq!(sol.diagnostics.s_norm, 6.0);
}

#[test]
fn zero_frequency_pair_is_discrete_harmonic() {
    let h = 1.0 / 16.0;
    let p = uniform_phase(&[0.0, 0.0, 0.0], 5.0, h).unwrap();
    let (plus, scale) = discrete_harmonic_defect(&p.plus(), h);
    assert!(plus.norm() <= 1e-12 * scale.max(1.0));
    let (minus, scale) = discrete_harmonic_defect(&p.minus(), h);
    assert!(minus.norm() <= 1e-12 * scale.max(1.0));
    assert_eq!(p.orthogonality_defect(h).norm(), 0.0);
}

#[test]
fn uniform_phase_scales_with_its_amplitude() {
    let h = 1.0 / 32.0;
    let beta = [2.0 * PI, 0.0, 0.0];
    let p10 = uniform_phase(&beta, 10.0, h).unwrap();
    let p20 = uniform_phase(&beta, 20.0, h).unwrap();
    assert_eq!(p10.j0, 1);
    let r = p20.norm() / p10.norm();
    assert!((r - 2.0).abs() < 0.2, "{r}");
    for p in [&p10, &p20] {
        assert!(p.orthogonality_defect(h).norm() < 1e-12);
        assert_eq!(p.a[p.j0], 0.0);
        let na: f64 = p.a.iter().map(|v| v * v).sum();
        assert!((na - 1.0).abs() < 1e-12);
        for eta in [p.plus(), p.minus()] {
            let (sum, scale) = discrete_harmonic_defect(&eta, h);
            assert!(sum.norm() <= 1e-10 * scale.max(1.0));
        }
    }
}

#[test]
fn uniform_phase_needs_a_vanishing_component() {
    assert!(matches!(uniform_phase(&[1.0, 2.0, 3.0], 4.0, 0.1), Err(Error::Unsupported(_))));
    assert!(matches!(uniform_phase_on_axis(&[1.0, 0.0, 3.0], 4.0, 0.1, 0), Err(Error::Unsupported(_))));
}

#[test]
fn uniform_pair_solves_both_equations() {
    let (l, sigma, dom) = cube3();
    let q = Potential::zero(dom.w.clone(), &sigma).unwrap();
    let phase = uniform_phase(&[2.0 * PI, 0.0, 0.0], 6.0, l.h()).unwrap();
    let pair = uniform_cgo_pair(&q, &q, &phase, &sigma, &dom).unwrap();
    for sol in [&pair.plus, &pair.minus] {
        assert!(sol.identity_gap() < 1e-12);
        assert!(sol.r_tilde.max_abs() < 1e-9);
    }
}
