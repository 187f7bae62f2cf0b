//! Builds lattices, weights, domains and potentials from config sections.

use std::f64::consts::PI;

use calderon_core::io::decode_real;
use calderon_core::sigma::{build_domain_and_cutoff, build_sigma_nine_point, build_sigma_p1, build_sigma_uniform};
use calderon_core::{Domain, Lattice, Potential, Region, ScalarField, SigmaSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::output::Provenance;
use crate::CliError;

pub struct Setup {
    pub lattice: Lattice,
    pub sigma: SigmaSet,
    pub kind: String,
}

impl Setup {
    pub fn provenance(&self) -> Provenance {
        let m = self.sigma.metrics();
        Provenance { h: self.lattice.h(), eps_a: m.eps_a, eps_d: m.eps_d }
    }
}

pub fn lattice(cfg: &Config) -> Result<Lattice, CliError> {
    let s = cfg.section("lattice")?;
    let d = s.usize("d")?;
    let n = s.usize("n")?;
    Ok(Lattice::new(d, n)?)
}

/// `[sigma] kind = "uniform" | "nine_point" | "p1"`.
pub fn setup(cfg: &Config) -> Result<Setup, CliError> {
    let lattice = lattice(cfg)?;
    let section = cfg.optional_section("sigma")?;
    let kind = match &section {
        Some(s) => s.str_or("kind", "uniform")?.to_string(),
        None => "uniform".to_string(),
    };
    let sigma = match kind.as_str() {
        "uniform" => build_sigma_uniform(lattice),
        "nine_point" => {
            let s = cfg.section("sigma")?;
            build_sigma_nine_point(lattice, s.f64("a")?, s.f64("b")?)?
        }
        "p1" => {
            // node displacement (t sin 2πy, t sin 2πx) / 2π
            let t = cfg.section("sigma")?.f64_or("amplitude", 0.0)?;
            let g = move |x: &[f64]| {
                [t * (2.0 * PI * x[1]).sin() / (2.0 * PI), t * (2.0 * PI * x[0]).sin() / (2.0 * PI)]
            };
            build_sigma_p1(lattice, &g)?
        }
        other => {
            return Err(CliError::Validation(format!(
                "key `sigma.kind` must be uniform, nine_point or p1, got {other:?}"
            )))
        }
    };
    Ok(Setup { lattice, sigma, kind })
}

/// `[domain] lo, hi, margin`: `W` is the cube `[lo, hi]^d`, `B` adds `margin` layers.
pub fn domain(cfg: &Config, setup: &Setup) -> Result<Domain, CliError> {
    let s = cfg.optional_section("domain")?;
    let (lo, hi, margin) = match s {
        Some(s) => (s.f64_or("lo", 0.25)?, s.f64_or("hi", 0.75)?, s.usize_or("margin", 2)?),
        None => (0.25, 0.75, 2),
    };
    let region = Region::cube(setup.lattice.dim(), lo, hi);
    Ok(build_domain_and_cutoff(setup.lattice, &setup.sigma, &region, margin)?)
}

/// Potential from `[name]`: `kind = "zero" | "constant" | "mode" | "random" | "file"`.
/// `m` defaults to `max |q|`.
pub fn potential(cfg: &Config, name: &str, setup: &Setup, domain: &Domain) -> Result<Option<Potential>, CliError> {
    let Some(s) = cfg.optional_section(name)? else {
        return Ok(None);
    };
    let interior = domain.w.interior(setup.sigma.directions());
    let kind = s.str_or("kind", "zero")?;
    let amp = || s.f64("amplitude");
    let q = match kind {
        "zero" => ScalarField::zeros(interior),
        "constant" => ScalarField::constant(interior, amp()?),
        "mode" => {
            let a = amp()?;
            let xi = s.f64_list("xi")?;
            if xi.len() != setup.lattice.dim() {
                return Err(CliError::Validation(format!("key `{}` needs {} entries", s.key_name("xi"), setup.lattice.dim())));
            }
            ScalarField::from_fn(interior, |x| a * (2.0 * PI * x.iter().zip(&xi).map(|(p, k)| p * k).sum::<f64>()).cos())
        }
        "random" => {
            let a = amp()?;
            let seed = cfg.seed()?;
            let salt = name.bytes().fold(0u64, |acc, b| acc.wrapping_mul(131).wrapping_add(u64::from(b)));
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
            let vals = (0..interior.len()).map(|_| a * rng.random_range(-1.0..1.0)).collect();
            ScalarField::new(interior, vals)?
        }
        "file" => {
            let path = s.path("path")?;
            let bytes = std::fs::read(&path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
            let f = decode_real(&bytes)?;
            if f.lattice() != &setup.lattice {
                return Err(CliError::Validation(format!("{} was written on a different lattice", path.display())));
            }
            f.restrict(&interior)
                .map_err(|_| CliError::Validation(format!("{} does not cover the interior of W", path.display())))?
        }
        other => {
            return Err(CliError::Validation(format!(
                "key `{}` must be zero, constant, mode, random or file, got {other:?}",
                s.key_name("kind")
            )))
        }
    };
    let m = s.f64_or("m", q.max_abs())?;
    Ok(Some(Potential::new(domain.w.clone(), q, m, &setup.sigma)?))
}

pub fn potential_or_zero(cfg: &Config, name: &str, setup: &Setup, domain: &Domain) -> Result<Potential, CliError> {
    match potential(cfg, name, setup, domain)? {
        Some(p) => Ok(p),
        None => Ok(Potential::zero(domain.w.clone(), &setup.sigma)?),
    }
}
