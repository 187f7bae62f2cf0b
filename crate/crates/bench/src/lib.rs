//! Shared fixtures for the benchmarks.

use calderon_core::sigma::{build_domain_and_cutoff, build_sigma_uniform};
use calderon_core::{Domain, Lattice, PointSet, Potential, Region, ScalarField, SigmaSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_field(set: PointSet, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..set.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    ScalarField::new(set, vals).expect("one value per point")
}

/// Uniform weights with `W` the centred cube `[lo, hi]^d` and `margin` layers around it.
pub fn uniform_domain(dim: usize, n: usize, lo: f64, hi: f64, margin: usize) -> (SigmaSet, Domain) {
    let lattice = Lattice::new(dim, n).expect("valid lattice");
    let sigma = build_sigma_uniform(lattice);
    let domain = build_domain_and_cutoff(lattice, &sigma, &Region::cube(dim, lo, hi), margin).expect("domain fits");
    (sigma, domain)
}

/// Random potential on the interior of `W` bounded by `amp`.
pub fn random_potential(sigma: &SigmaSet, domain: &Domain, amp: f64, seed: u64) -> Potential {
    let interior = domain.w.interior(sigma.directions());
    let mut q = random_field(interior, seed);
    q.values_mut().iter_mut().for_each(|v| *v *= amp);
    Potential::new(domain.w.clone(), q, amp, sigma).expect("potential below its bound")
}
