use std::f64::consts::PI;

use calderon_core::lattice::{fourier_coefficient, fourier_transform};
use calderon_core::reconstruct::*;
use calderon_core::sigma::{build_domain_and_cutoff, build_sigma_uniform, Region, SigmaSet};
use calderon_core::*;
use num_complex::Complex64;

fn setup() -> (SigmaSet, Domain) {
    let l = Lattice::new(3, 10).unwrap();
    let sigma = build_sigma_uniform(l);
    let dom = build_domain_and_cutoff(l, &sigma, &Region::cube(3, 0.3, 0.5), 1).unwrap();
    (sigma, dom)
}

fn potential(dom: &Domain, sigma: &SigmaSet, f: impl Fn(&[f64]) -> f64) -> Potential {
    let q = ScalarField::from_fn(dom.w.interior(sigma.directions()), f);
    Potential::new(dom.w.clone(), q, 1.0, sigma).unwrap()
}

#[test]
fn triple_for_a_unit_frequency() {
    let t = orthogonal_triple(&[1.0, 0.0, 0.0], 7.0).unwrap();
    let delta: f64 = t.delta.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((delta - (49.0 - 4.0 * PI * PI).sqrt()).abs() < 1e-12);
    for eta in [t.eta1(), t.eta2()] {
        let dd: Complex64 = eta.iter().map(|z| z * z).sum();
        assert!(dd.norm() < 1e-12);
    }
    // η₁ + η₂ = 2iβ
    for (i, (a, b)) in t.eta1().iter().zip(t.eta2()).enumerate() {
        assert!((a + b - Complex64::new(0.0, 2.0 * t.beta[i])).norm() < 1e-14);
    }
}

#[test]
fn distance_selection_examples() {
    let zero = select_mu(0.0, 1e-2, 0.0, 0.0, 1.0).unwrap();
    assert_eq!(zero.regime, Regime::SmallDistance);
    assert!((zero.mu - 0.1).abs() < 1e-15);
    let tiny = select_mu(1e-40, 1e-2, 0.0, 0.0, 1.0).unwrap();
    assert_eq!(tiny.regime, Regime::SmallDistance);
    assert!((tiny.s_choice - 10.0).abs() < 1e-12);
    let large = select_mu(1e-3, 1e-2, 0.0, 0.0, 1.0).unwrap();
    assert_eq!(large.regime, Regime::LargeDistance);
    assert!((large.s_choice - 2.3026).abs() < 1e-4);
    assert!((large.mu - 3.0 / 1e3f64.ln()).abs() < 1e-12);
    assert!(large.in_range);
    assert!(select_mu(1.0, 1e-2, 0.0, 0.0, 1.0).is_err());
    assert!(select_mu(0.5, 1e-2, 0.0, 0.0, 0.0).is_err());
}

#[test]
fn anisotropy_and_distortion_raise_the_floor() {
    let base = select_mu(0.0, 1e-4, 0.0, 0.0, 1.0).unwrap().mu_tilde;
    assert!((base - 1e-2).abs() < 1e-15);
    assert!((select_mu(0.0, 1e-4, 0.04, 0.0, 1.0).unwrap().mu_tilde - 0.2).abs() < 1e-15);
    assert!((select_mu(0.0, 1e-4, 0.0, 0.3, 0.5).unwrap().mu_tilde - 0.6).abs() < 1e-15);
}

#[test]
fn frequencies_are_sorted_by_length() {
    let f = frequencies_within(3, 1.0);
    assert_eq!(f.len(), 7);
    assert_eq!(f[0], vec![0, 0, 0]);
    assert_eq!(frequencies_within(2, 2.0).len(), 13);
    assert_eq!(frequencies_within(3, 0.5), vec![vec![0, 0, 0]]);
}

#[test]
fn envelope_decreases_with_mu() {
    let a = envelope(1e-6, 1.0, 3, 1.0, 1.0);
    let b = envelope(1e-3, 1.0, 3, 1.0, 1.0);
    assert!(a < b);
    assert!((envelope_exponent(1.0, 3, 1.0, 1.0) - 0.4).abs() < 0.05);
}

#[test]
fn equal_potentials_give_vanishing_estimates() {
    let (sigma, dom) = setup();
    let q = potential(&dom, &sigma, |x| (2.0 * PI * x[0]).sin());
    let ctx = ReconstructionContext::new(q.clone(), q, &sigma, &dom).unwrap();
    assert_eq!(ctx.lambda.surrogate, 0.0);
    for xi in [[0, 0, 0], [1, 0, 0], [0, 1, -1]] {
        let est = estimate_fourier_mode(&ctx, &xi, 12.0, 0.1).unwrap();
        assert_eq!(est.estimate.norm(), 0.0);
        assert_eq!(est.exact.norm(), 0.0);
        assert!(est.within_budget());
    }
}

#[test]
fn estimate_tracks_the_exact_mode() {
    let (sigma, dom) = setup();
    let q1 = potential(&dom, &sigma, |x| 0.8 * (PI * x[1]).cos());
    let q2 = Potential::zero(dom.w.clone(), &sigma).unwrap();
    let ctx = ReconstructionContext::new(q1, q2, &sigma, &dom).unwrap();
    let est = estimate_fourier_mode(&ctx, &[0, 0, 0], 10.0, 0.1).unwrap();
    assert!(est.error() <= est.budget.certified * (1.0 + 1e-9) + 1e-12);
    assert!(est.budget.identity_gap < 1e-8 * est.exact.norm().max(1e-12));
    assert!((est.exact - fourier_coefficient(ctx.difference(), &[0.0; 3])).norm() == 0.0);
}

#[test]
fn averaging_constants_and_separable_fields() {
    let l = Lattice::new(3, 6).unwrap();
    let c = averaged_potential(&ScalarField::constant(l.full(), 2.0), 1).unwrap();
    assert_eq!(c.lattice().dim(), 2);
    assert!(c.values().iter().all(|&v| (v - 2.0).abs() < 1e-14));
    let f = |t: f64| 1.0 + t * t;
    let g = |x: &[f64]| (3.0 * x[0]).sin() + x[2];
    let sep = ScalarField::from_fn(l.full(), |x| f(x[1]) * g(x));
    let avg = averaged_potential(&sep, 1).unwrap();
    let mean_f: f64 = (0..6).map(|k| f(k as f64 / 6.0)).sum::<f64>() / 6.0;
    for p in 0..avg.len() {
        let y = avg.domain().position(p);
        let expected = mean_f * g(&[y[0], 0.0, y[1]]);
        assert!((avg.values()[p] - expected).abs() < 1e-13);
    }
}

#[test]
fn averaging_matches_the_slice_of_the_transform() {
    let l = Lattice::new(3, 6).unwrap();
    let q = ScalarField::from_fn(l.full(), |x| (x[0] * 5.0).cos() * x[1] + (x[2] - x[0]).exp());
    let full = fourier_transform(&q).unwrap();
    for axis in 0..3 {
        let reduced = fourier_transform(&averaged_potential(&q, axis).unwrap()).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                let mut idx = vec![a, b];
                idx.insert(axis, 0);
                assert!((reduced.get(&[a, b]) - full.get(&idx)).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn averaging_rejects_bad_axes() {
    let l = Lattice::new(2, 5).unwrap();
    let q = ScalarField::constant(l.full(), 1.0);
    assert!(matches!(averaged_potential(&q, 2), Err(Error::DirectionOutOfRange { .. })));
    let line = ScalarField::constant(Lattice::new(1, 5).unwrap().full(), 1.0);
    assert!(matches!(averaged_potential(&line, 0), Err(Error::Unsupported(_))));
}

#[test]
fn off_slice_modes_are_invisible_on_the_slice() {
    let (sigma, dom) = setup();
    // varies only along axis 2, so every ξ with ξ_2 = 0 except ξ = 0 sees nothing
    let q1 = potential(&dom, &sigma, |x| 0.5 * (2.0 * PI * x[2]).cos());
    let q2 = Potential::zero(dom.w.clone(), &sigma).unwrap();
    let xis = vec![vec![1, 0, 0], vec![0, 1, 0]];
    let report = uniqueness_check(q1, q2, &sigma, &dom, 2, &xis, &[4.0, 8.0]).unwrap();
    assert_eq!(report.rows.len(), 4);
    for row in &report.rows {
        assert!(row.exact.norm() < 1e-3, "{row:?}");
        assert!(row.error < 1e-2, "{row:?}");
    }
}

#[test]
fn uniqueness_rejects_frequencies_off_the_slice() {
    let (sigma, dom) = setup();
    let q = Potential::zero(dom.w.clone(), &sigma).unwrap();
    let r = uniqueness_check(q.clone(), q, &sigma, &dom, 0, &[vec![1, 0, 0]], &[4.0]);
    assert!(matches!(r, Err(Error::OutOfRange(_))));
}
