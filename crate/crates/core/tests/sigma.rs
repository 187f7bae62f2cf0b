use std::f64::consts::PI;

use calderon_core::calculus::laplacian;
use calderon_core::sigma::*;
use calderon_core::*;

#[test]
fn uniform_weights_and_metrics() {
    let l = Lattice::new(2, 8).unwrap();
    let s = build_sigma_uniform(l);
    assert!(s.fields().iter().all(|f| f.values().iter().all(|&v| v == 1.0)));
    let m = s.metrics();
    assert_eq!((m.eps_a, m.eps_d, m.m_bound), (0.0, 0.0, 2.0));
    assert!(s.is_uniform());
}

#[test]
fn smallest_dirichlet_eigenvalue_on_four_cells() {
    // nodes 0, 1/4, ..., 1 need five lattice points, so the operator is
    // rescaled from spacing 1/5 to 1/4
    let l = Lattice::new(1, 5).unwrap();
    let s = build_sigma_uniform(l);
    let interior = l.full().interior(s.directions());
    let m = laplacian_matrix(&s, &interior, &interior).unwrap().to_dense();
    let ev = calderon_core::linalg::symmetric_eigenvalues(&(-m));
    let smallest = ev[0] * (4.0f64 / 5.0).powi(2);
    assert!((smallest - 64.0 * (PI / 8.0).sin().powi(2)).abs() < 1e-10);
    assert!((smallest - 9.372583).abs() < 1e-6);
}

#[test]
fn nine_point_weights() {
    let l = Lattice::new(2, 8).unwrap();
    let five = build_sigma_nine_point(l, 1.0, 0.0).unwrap().metrics();
    assert_eq!((five.eps_a, five.eps_d), (0.0, 0.0));
    assert_eq!(build_sigma_nine_point(l, 1.0, 1.0).unwrap().metrics().eps_a, 2.0);
    // entrywise: the diagonal of Σσ e⊗e is a + 2b, the off-diagonal cancels
    let third = build_sigma_nine_point(l, 2.0 / 3.0, 1.0 / 3.0).unwrap().metrics();
    assert!((third.eps_a - 1.0 / 3.0).abs() < 1e-15);
    let half = build_sigma_nine_point(l, 0.5, 0.5).unwrap().metrics();
    assert_eq!(half.eps_d, 0.0);
    assert_eq!(half.eps_a, 0.5);
    assert_eq!(build_sigma_nine_point(l, 0.5, 0.25).unwrap().metrics().eps_a, 0.0);
    assert!(matches!(build_sigma_nine_point(Lattice::new(3, 5).unwrap(), 1.0, 0.0), Err(Error::Unsupported(_))));
}

#[test]
fn unperturbed_triangles() {
    let l = Lattice::new(2, 9).unwrap();
    let s = build_sigma_p1(l, &|_| [0.0, 0.0]).unwrap();
    let expected = [1.0, 1.0, 0.0];
    for (f, e) in s.fields().iter().zip(expected) {
        assert!(f.values().iter().all(|&v| v == e));
    }
    assert_eq!((s.metrics().eps_a, s.metrics().eps_d), (0.0, 0.0));
}

#[test]
fn perturbation_raises_both_metrics() {
    let l = Lattice::new(2, 16).unwrap();
    let mut prev = (0.0, 0.0);
    for t in [0.01, 0.02, 0.04] {
        let s = build_sigma_p1(l, &move |x: &[f64]| [t * (2.0 * PI * x[1]).sin(), 0.0]).unwrap();
        let m = s.metrics();
        assert!(m.eps_a > prev.0 && m.eps_d > prev.1);
        prev = (m.eps_a, m.eps_d);
    }
}

#[test]
fn stencil_matches_direct_assembly() {
    let l = Lattice::new(2, 10).unwrap();
    let g = |x: &[f64]| [0.03 * (2.0 * PI * x[1]).sin(), 0.02 * (2.0 * PI * x[0]).cos()];
    let sigma = build_sigma_p1(l, &g).unwrap();
    let rigidity = assemble_p1_rigidity(l, &g).unwrap();
    let full = l.full();
    let interior = full.interior(sigma.directions());
    let stencil = laplacian_matrix(&sigma, &interior, &full).unwrap().to_dense();
    let direct = rigidity.matrix.to_dense();
    for (r, &k) in interior.keys().iter().enumerate() {
        let row = full.index_of_key(k).unwrap();
        for c in 0..full.len() {
            assert!((stencil[(r, c)] - direct[(row, c)]).abs() < 1e-12 * direct.amax());
        }
    }
}

#[test]
fn flipped_triangle_is_rejected() {
    let l = Lattice::new(2, 8).unwrap();
    // a jump that folds one column of cells over its neighbour
    let g = |x: &[f64]| [if x[0] > 0.5 { -0.4 } else { 0.0 }, 0.0];
    assert!(matches!(build_sigma_p1(l, &g), Err(Error::FlippedTriangle { .. })));
}

#[test]
fn laplacian_kills_constants_and_is_symmetric() {
    let l = Lattice::new(2, 9).unwrap();
    let sigma = build_sigma_p1(l, &|x: &[f64]| [0.02 * (2.0 * PI * x[1]).sin(), 0.0]).unwrap();
    let w = PointSet::index_box(l, &[1, 1], &[7, 6]).unwrap();
    let lap = laplacian(&ScalarField::constant(w.clone(), 1.0), &sigma).unwrap();
    assert!(lap.max_abs() < 1e-9);
    let op = assemble_laplacian(&sigma, &w).unwrap();
    let cols: Vec<usize> = op.rows.keys().iter().map(|&k| w.index_of_key(k).unwrap()).collect();
    let block = op.matrix.submatrix(&(0..op.rows.len()).collect::<Vec<_>>(), &cols).to_dense();
    assert!((&block - block.transpose()).amax() <= 1e-12 * block.amax());
}

#[test]
fn domain_chain_and_cutoff() {
    let l = Lattice::new(3, 16).unwrap();
    let sigma = build_sigma_uniform(l);
    let dirs = sigma.directions();
    let d = build_domain_and_cutoff(l, &sigma, &Region::cube(3, 0.25, 0.75), 2).unwrap();
    let kdd = l.full().interior(dirs).interior(dirs);
    assert!(d.w.is_subset_of(&d.b.interior(dirs)));
    assert!(d.b.is_subset_of(&kdd));
    for &k in d.w.keys() {
        assert_eq!(d.psi.get(k), Some(1.0));
    }
    for &k in d.b.boundary(dirs).keys() {
        assert_eq!(d.psi.get(k), Some(0.0));
    }
    for (p, &k) in d.psi.domain().keys().iter().enumerate() {
        if !d.b.contains_key(k) {
            assert_eq!(d.psi.values()[p], 0.0);
        }
    }
}

#[test]
fn cutoff_bound_is_stable_under_refinement() {
    let mut bounds = Vec::new();
    for (n, margin) in [(16usize, 2usize), (32, 4), (64, 8)] {
        let l = Lattice::new(2, n).unwrap();
        let sigma = build_sigma_uniform(l);
        let region = Region::Box { lo: vec![0.375; 2], hi: vec![0.5; 2] };
        bounds.push(build_domain_and_cutoff(l, &sigma, &region, margin).unwrap().m0);
    }
    for w in bounds.windows(2) {
        let r = w[1] / w[0];
        assert!((0.5..=2.0).contains(&r), "{bounds:?}");
    }
}

#[test]
fn region_near_the_edge_is_rejected() {
    let l = Lattice::new(2, 8).unwrap();
    let sigma = build_sigma_uniform(l);
    let r = build_domain_and_cutoff(l, &sigma, &Region::cube(2, 0.0, 0.5), 1);
    assert!(matches!(r, Err(Error::NotInterior(_))));
}
