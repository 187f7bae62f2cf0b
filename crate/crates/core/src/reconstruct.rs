//! Fourier-mode estimation of `q₁ - q₂` from boundary data, the choice of
//! the stability modulus `μ`, `H^{-r}` bounds, and the averaged-potential
//! check on uniform meshes.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgo::{cgo_solve, uniform_cgo_pair, uniform_phase_on_axis, CgoPhase, ClosureBranch};
use crate::dtn::{distance_with, dtn_map, Bracketed, BoundaryGram, DtnOperator, Potential};
use crate::error::{Error, Result};
use crate::lattice::{
    fourier_coefficient, fourier_transform, integrate, norm_l2, ComplexField, Field,
    FrequencyConvention, Lattice, ScalarField,
};
use crate::sigma::{Domain, SigmaSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructionConfig {
    /// Bound on `‖q‖_∞`.
    pub m: f64,
    /// Lower end of the CGO range; `2(m + 1)` when absent.
    pub s0: Option<f64>,
    /// Admissible-range constant `c`.
    pub c_const: f64,
    /// Sobolev exponents for the `H^{-r}` bounds.
    pub r: Vec<f64>,
    /// Optional cap on `|ξ|` in addition to `min(c/μ, N/2)`.
    pub max_frequency: Option<f64>,
    pub frequency_convention: FrequencyConvention,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            m: 1.0,
            s0: None,
            c_const: 1.0,
            r: vec![1.0, 2.0, 4.0],
            max_frequency: None,
            frequency_convention: FrequencyConvention::Literal,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::OutOfRange(format!("{name} must be positive, got {v}")))
            }
        };
        positive("m", self.m)?;
        positive("c_const", self.c_const)?;
        if let Some(s0) = self.s0 {
            positive("s0", s0)?;
        }
        if let Some(k) = self.max_frequency {
            positive("max_frequency", k)?;
        }
        if self.r.is_empty() {
            return Err(Error::OutOfRange("at least one Sobolev exponent is needed".into()));
        }
        for &r in &self.r {
            positive("r", r)?;
        }
        Ok(())
    }

    pub fn s0(&self) -> f64 {
        self.s0.unwrap_or_else(|| crate::cgo::default_s0(self.m))
    }
}

/// Mutually orthogonal `(s, β, δ)` with `β = -2πξ` and `|s|² = |β|² + |δ|²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalTriple {
    pub s: Vec<f64>,
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
}

impl OrthogonalTriple {
    /// `s + i(β + δ)`.
    pub fn eta1(&self) -> Vec<Complex64> {
        (0..self.s.len()).map(|i| Complex64::new(self.s[i], self.beta[i] + self.delta[i])).collect()
    }

    /// `-s + i(β - δ)`.
    pub fn eta2(&self) -> Vec<Complex64> {
        (0..self.s.len()).map(|i| Complex64::new(-self.s[i], self.beta[i] - self.delta[i])).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Unit vectors orthogonal to `v` and to each other, from Gram–Schmidt on
/// `e_0, e_1, …` in index order.
fn orthonormal_complement(v: &[f64], count: usize) -> Vec<Vec<f64>> {
    let d = v.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let vn = norm(v);
    if vn > 0.0 {
        basis.push(v.iter().map(|x| x / vn).collect());
    }
    let start = basis.len();
    for p in 0..d {
        if basis.len() - start == count {
            break;
        }
        let mut e = vec![0.0; d];
        e[p] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&e, b);
                e.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = norm(&e);
        if n > 1e-8 {
            basis.push(e.into_iter().map(|x| x / n).collect());
        }
    }
    basis.split_off(start)
}

pub fn orthogonal_triple(xi: &[f64], s_norm: f64) -> Result<OrthogonalTriple> {
    let d = xi.len();
    if d < 3 {
        return Err(Error::Unsupported(format!("the orthogonal triple needs d ≥ 3, got d = {d}")));
    }
    let beta: Vec<f64> = xi.iter().map(|x| -2.0 * PI * x).collect();
    let b2 = dot(&beta, &beta);
    if !(s_norm * s_norm >= b2 * (1.0 - 1e-14)) {
        return Err(Error::OutOfRange(format!("|s| = {s_norm} is below |β| = {}", b2.sqrt())));
    }
    let units = orthonormal_complement(&beta, 2);
    let delta_norm = (s_norm * s_norm - b2).max(0.0).sqrt();
    Ok(OrthogonalTriple {
        s: units[0].iter().map(|x| x * s_norm).collect(),
        beta,
        delta: units[1].iter().map(|x| x * delta_norm).collect(),
    })
}

/// Which side of the `−log λ ≥ 3/μ̃` threshold the data fall on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `|s| = 1/μ̃`.
    SmallDistance,
    /// `|s| = −log(λ)/3`.
    LargeDistance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuChoice {
    pub mu: f64,
    pub mu_tilde: f64,
    pub s_choice: f64,
    pub regime: Regime,
    /// `h`, `ε_a`, `ε_d` and `λ` all below `c`.
    pub in_range: bool,
}

pub fn select_mu(lambda: f64, h: f64, eps_a: f64, eps_d: f64, c_const: f64) -> Result<MuChoice> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::OutOfRange(format!("DtN distance λ = {lambda} must lie in [0, 1)")));
    }
    if !(c_const > 0.0) {
        return Err(Error::OutOfRange(format!("c must be positive, got {c_const}")));
    }
    let mu_tilde = eps_a.sqrt().max(h.sqrt()).max(eps_d / c_const);
    let neg_log = if lambda == 0.0 { f64::INFINITY } else { -lambda.ln() };
    let (regime, s_choice) = if neg_log >= 3.0 / mu_tilde {
        (Regime::SmallDistance, 1.0 / mu_tilde)
    } else {
        (Regime::LargeDistance, neg_log / 3.0)
    };
    let mu = mu_tilde.max(3.0 / neg_log);
    let in_range = [h, eps_a, eps_d, lambda].iter().all(|&v| v < c_const);
    Ok(MuChoice { mu, mu_tilde, s_choice, regime, in_range })
}

/// Terms bounding `|exact − estimate|` for one mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub r1_l2: f64,
    pub r2_l2: f64,
    pub dq_l2: f64,
    pub dq_sup: f64,
    /// `‖δq‖₂(‖r₁‖ + ‖r₂‖) + ‖δq‖_∞‖r₁‖‖r₂‖`.
    pub remainder: f64,
    /// `|∫ δq u₁u₂ + (1/h)∫(Λ₁ − Λ₂)(u₁)u₂|`, measured.
    pub identity_gap: f64,
    /// `remainder + identity_gap`.
    pub certified: f64,
    pub u1_h_half: f64,
    pub u2_h_half: f64,
    /// `log(λ ‖u₁‖_{H^{1/2}} ‖u₂‖_{H^{1/2}})`; absent when `λ = 0`.
    pub lambda_log_term: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeEstimate {
    pub xi: Vec<i64>,
    pub s_norm: f64,
    pub triple: OrthogonalTriple,
    pub eta1: Vec<Complex64>,
    pub eta2: Vec<Complex64>,
    pub estimate: Complex64,
    pub exact: Complex64,
    pub lambda: f64,
    pub mu: f64,
    pub budget: ErrorBudget,
}

impl ModeEstimate {
    pub fn error(&self) -> f64 {
        (self.exact - self.estimate).norm()
    }

    pub fn within_budget(&self) -> bool {
        self.error() <= self.budget.certified
    }
}

/// Both potentials with their DtN maps and the boundary Gram factor.
pub struct ReconstructionContext<'a> {
    pub sigma: &'a SigmaSet,
    pub domain: &'a Domain,
    pub q1: Potential,
    pub q2: Potential,
    pub dtn1: DtnOperator,
    pub dtn2: DtnOperator,
    pub gram: BoundaryGram,
    pub lambda: Bracketed,
    dq: ScalarField,
}

impl<'a> ReconstructionContext<'a> {
    pub fn new(q1: Potential, q2: Potential, sigma: &'a SigmaSet, domain: &'a Domain) -> Result<Self> {
        if !q1.w().same_points(&domain.w) || !q2.w().same_points(&domain.w) {
            return Err(Error::DomainMismatch("both potentials must live on the domain's W".into()));
        }
        let (dtn1, dtn2) = rayon::join(|| dtn_map(&q1, sigma), || dtn_map(&q2, sigma));
        let (dtn1, dtn2) = (dtn1?, dtn2?);
        let gram = BoundaryGram::new(&domain.w, sigma)?;
        let lambda = distance_with(&gram, &dtn1, &dtn2)?;
        let dq = q1.q().sub(q2.q())?;
        Ok(Self { sigma, domain, q1, q2, dtn1, dtn2, gram, lambda, dq })
    }

    /// `q₁ − q₂` on `W̊`.
    pub fn difference(&self) -> &ScalarField {
        &self.dq
    }

    /// `(1/h)∫_{∂W}(Λ₁ − Λ₂)(u)v`.
    pub fn boundary_pairing(&self, u: &ComplexField, v: &ComplexField) -> Result<Complex64> {
        let b = &self.dtn1.boundary_nodes;
        let gu = u.restrict(b)?;
        let gv = v.restrict(b)?;
        Ok(self.dtn1.pairing(&gu, &gv)? - self.dtn2.pairing(&gu, &gv)?)
    }

    /// `∫_{W̊} δq u v`.
    fn interior_integral(&self, u: &ComplexField, v: &ComplexField) -> Result<Complex64> {
        let ui = u.restrict(self.dq.domain())?;
        let vi = v.restrict(self.dq.domain())?;
        Ok(integrate(&ui.mul(&vi)?.mul(&self.dq.to_complex())?))
    }

    fn remainder_bound(&self, r1: &ComplexField, r2: &ComplexField) -> Result<(f64, f64, f64, f64, f64)> {
        let r1 = norm_l2(&r1.restrict(self.dq.domain())?);
        let r2 = norm_l2(&r2.restrict(self.dq.domain())?);
        let dq_l2 = norm_l2(&self.dq);
        let dq_sup = self.dq.max_abs();
        Ok((dq_l2 * (r1 + r2) + dq_sup * r1 * r2, r1, r2, dq_l2, dq_sup))
    }

    fn centroid_factor(&self, xi: &[f64]) -> Complex64 {
        let xc = self.domain.w.centroid();
        Complex64::from_polar(1.0, -2.0 * PI * dot(xi, &xc))
    }
}

fn xi_f64(xi: &[i64]) -> Vec<f64> {
    xi.iter().map(|&k| k as f64).collect()
}

/// Estimate of `F_h(q₁ − q₂)(ξ)` from `(1/h)∫(Λ₁ − Λ₂)(u₁)u₂`, with `u₁`, `u₂`
/// CGO solutions for `q₁`, `q₂` whose product oscillates like `e^{-2iπξ·x}`.
pub fn estimate_fourier_mode(ctx: &ReconstructionContext<'_>, xi: &[i64], s_norm: f64, mu: f64) -> Result<ModeEstimate> {
    let xf = xi_f64(xi);
    let half: Vec<f64> = xf.iter().map(|x| 0.5 * x).collect();
    let triple = orthogonal_triple(&half, s_norm)?;
    let eta1 = triple.eta1();
    let eta2 = triple.eta2();
    let u1 = cgo_solve(&ctx.q1, &CgoPhase::new(eta1.clone())?, ctx.sigma, ctx.domain)?;
    let u2 = cgo_solve(&ctx.q2, &CgoPhase::new(eta2.clone())?, ctx.sigma, ctx.domain)?;

    let pairing = ctx.boundary_pairing(&u1.u, &u2.u)?;
    let factor = ctx.centroid_factor(&xf);
    let estimate = -factor * pairing;
    let exact = fourier_coefficient(&ctx.dq, &xf);

    let interior = ctx.interior_integral(&u1.u, &u2.u)?;
    let identity_gap = (interior + pairing).norm();
    let (remainder, r1_l2, r2_l2, dq_l2, dq_sup) = ctx.remainder_bound(&u1.r_tilde, &u2.r_tilde)?;
    let b = &ctx.dtn1.boundary_nodes;
    let u1_h_half = ctx.gram.h_half(&u1.u.restrict(b)?)?;
    let u2_h_half = ctx.gram.h_half(&u2.u.restrict(b)?)?;
    let lambda = ctx.lambda.surrogate;
    let lambda_log_term = if lambda > 0.0 { Some(lambda.ln() + u1_h_half.ln() + u2_h_half.ln()) } else { None };
    Ok(ModeEstimate {
        xi: xi.to_vec(),
        s_norm,
        triple,
        eta1,
        eta2,
        estimate,
        exact,
        lambda,
        mu,
        budget: ErrorBudget {
            r1_l2,
            r2_l2,
            dq_l2,
            dq_sup,
            remainder,
            identity_gap,
            certified: remainder + identity_gap,
            u1_h_half,
            u2_h_half,
            lambda_log_term,
        },
    })
}

/// Integer frequencies with `|ξ| ≤ radius`, ordered by `|ξ|²` then lexicographically.
pub fn frequencies_within(dim: usize, radius: f64) -> Vec<Vec<i64>> {
    let k = radius.floor().max(0.0) as i64;
    let mut out = Vec::new();
    let mut cur = vec![-k; dim];
    loop {
        let n2: i64 = cur.iter().map(|v| v * v).sum();
        if (n2 as f64) <= radius * radius + 1e-9 {
            out.push(cur.clone());
        }
        let mut p = dim;
        loop {
            if p == 0 {
                out.sort_by_key(|v| (v.iter().map(|x| x * x).sum::<i64>(), v.clone()));
                return out;
            }
            p -= 1;
            if cur[p] < k {
                cur[p] += 1;
                break;
            }
            cur[p] = -k;
        }
    }
}

/// `min_{1 ≤ ρ ≤ 1/μ} (a ρ^d μ² + b ρ^{-2r})^{1/2}`.
pub fn envelope(mu: f64, r: f64, d: usize, a: f64, b: f64) -> f64 {
    let f = |t: f64| {
        let rho = t.exp();
        a * rho.powi(d as i32) * mu * mu + b * rho.powf(-2.0 * r)
    };
    let (mut lo, mut hi) = (0.0, (1.0 / mu).max(1.0).ln());
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    f(0.5 * (lo + hi)).min(f(0.0)).sqrt()
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Fitted log-log slope of the envelope over `μ ∈ [1e-8, 1e-4]`.
pub fn envelope_exponent(r: f64, d: usize, a: f64, b: f64) -> f64 {
    let mus: Vec<f64> = (0..9).map(|k| 10f64.powf(-8.0 + 0.5 * k as f64)).collect();
    let x: Vec<f64> = mus.iter().map(|m| m.ln()).collect();
    let y: Vec<f64> = mus.iter().map(|&m| envelope(m, r, d, a, b).ln()).collect();
    fit_slope(&x, &y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevRow {
    pub r: f64,
    /// `‖q₁ − q₂‖_{H^{-r}}` from the full transform.
    pub exact: f64,
    /// Best split bound over the estimated radii.
    pub bound: f64,
    pub bound_radius: f64,
    pub exponent_expected: f64,
    pub exponent_fitted: f64,
    /// `exact / μ^{2r/(2r+d)}`.
    pub fitted_constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub h: f64,
    pub eps_a: f64,
    pub eps_d: f64,
    pub m: f64,
    pub lambda: Bracketed,
    pub mu: MuChoice,
    pub radius: f64,
    pub modes: Vec<ModeEstimate>,
    /// `max |exact − estimate| / μ` over the modes.
    pub fitted_c: f64,
    pub all_within_budget: bool,
    pub sobolev: Vec<SobolevRow>,
}

pub fn stability_report(
    q1: Potential,
    q2: Potential,
    sigma: &SigmaSet,
    domain: &Domain,
    config: &ReconstructionConfig,
) -> Result<StabilityReport> {
    config.validate()?;
    for q in [&q1, &q2] {
        if q.q().max_abs() > config.m * (1.0 + 1e-12) {
            return Err(Error::OutOfRange(format!("potential exceeds the bound m = {}", config.m)));
        }
    }
    let ctx = ReconstructionContext::new(q1, q2, sigma, domain)?;
    let lattice = *sigma.lattice();
    let h = lattice.h();
    let metrics = sigma.metrics();
    let mu = select_mu(ctx.lambda.surrogate, h, metrics.eps_a, metrics.eps_d, config.c_const)?;
    let mut radius = (config.c_const / mu.mu).min(lattice.n() as f64 / 2.0);
    if let Some(k) = config.max_frequency {
        radius = radius.min(k);
    }
    let s0 = config.s0();
    let xis = frequencies_within(lattice.dim(), radius);
    let modes: Vec<ModeEstimate> = xis
        .par_iter()
        .map(|xi| {
            let beta = PI * norm(&xi_f64(xi));
            estimate_fourier_mode(&ctx, xi, mu.s_choice.max(beta).max(s0), mu.mu)
        })
        .collect::<Result<_>>()?;
    let fitted_c = modes.iter().map(|m| m.error() / mu.mu).fold(0.0, f64::max);
    let all_within_budget = modes.iter().all(ModeEstimate::within_budget);

    let dq_hat = fourier_transform(ctx.difference())?;
    let n = lattice.n();
    let d = lattice.dim();
    let interior_volume = ctx.difference().len() as f64 * lattice.cell_volume();
    let l2_prior = 2.0 * config.m * interior_volume.sqrt();
    let per_mode_bound = |xi: &[i64]| -> Option<f64> {
        modes.iter().find(|m| m.xi == xi).map(|m| m.estimate.norm() + m.budget.certified)
    };
    let mut radii: Vec<f64> = modes.iter().map(|m| norm(&xi_f64(&m.xi))).collect();
    radii.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let a_const = modes
        .iter()
        .map(|m| ((m.estimate.norm() + m.budget.certified) / mu.mu).powi(2))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let b_const = (l2_prior * l2_prior).max(f64::MIN_POSITIVE);
    let mut sobolev = Vec::new();
    for &r in &config.r {
        let mut exact_sq = 0.0;
        for (idx, v) in dq_hat.values().iter().enumerate() {
            let xi = dq_hat.frequency(idx);
            exact_sq += v.norm_sqr() * (1.0 + config.frequency_convention.norm_sq(&xi, n)).powf(-r);
        }
        let mut best = (f64::INFINITY, 0.0);
        for &rad in &radii {
            let mut low = 0.0;
            let mut missing = false;
            for idx in 0..dq_hat.values().len() {
                let xi = dq_hat.frequency(idx);
                let rep = config.frequency_convention.representative(&xi, n);
                let n2: f64 = rep.iter().map(|v| v * v).sum();
                if n2 <= rad * rad + 1e-9 {
                    let key: Vec<i64> = rep.iter().map(|&v| v.round() as i64).collect();
                    match per_mode_bound(&key) {
                        Some(bd) => low += bd * bd * (1.0 + n2).powf(-r),
                        None => missing = true,
                    }
                }
            }
            if missing {
                continue;
            }
            let value = (low + (1.0 + rad * rad).powf(-r) * b_const).sqrt();
            if value < best.0 {
                best = (value, rad);
            }
        }
        let expected = 2.0 * r / (2.0 * r + d as f64);
        let exact = exact_sq.sqrt();
        sobolev.push(SobolevRow {
            r,
            exact,
            bound: best.0,
            bound_radius: best.1,
            exponent_expected: expected,
            exponent_fitted: envelope_exponent(r, d, a_const, b_const),
            fitted_constant: exact / mu.mu.powf(expected),
        });
    }
    Ok(StabilityReport {
        h,
        eps_a: metrics.eps_a,
        eps_d: metrics.eps_d,
        m: config.m,
        lambda: ctx.lambda.clone(),
        mu,
        radius,
        modes,
        fitted_c,
        all_within_budget,
        sobolev,
    })
}

/// `q[j](x̂) = h Σ_{x_j} q(x)` on the `(d−1)`-dimensional grid, `q` extended
/// by zero to the full grid.
pub fn averaged_potential(q: &ScalarField, j: usize) -> Result<ScalarField> {
    let lattice = *q.lattice();
    let d = lattice.dim();
    if d < 2 {
        return Err(Error::Unsupported("averaging needs d ≥ 2".into()));
    }
    if j >= d {
        return Err(Error::DirectionOutOfRange { index: j, count: d });
    }
    if !q.domain().is_primal() {
        return Err(Error::DomainMismatch("averaging acts on primal fields".into()));
    }
    let reduced = Lattice::new(d - 1, lattice.n())?;
    let full = reduced.full();
    let mut values = vec![0.0; full.len()];
    let h = lattice.h();
    let mut coords = vec![0i64; d];
    for (idx, &key) in q.domain().keys().iter().enumerate() {
        lattice.decode_into(key, &mut coords);
        let rest: Vec<i64> = coords.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &c)| c).collect();
        let slot = full.index_of(&rest).ok_or_else(|| Error::DomainMismatch("point outside the reduced grid".into()))?;
        values[slot] += h * q.values()[idx];
    }
    Field::new(full, values)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessRow {
    pub xi: Vec<i64>,
    pub alpha: f64,
    pub eta_norm: f64,
    pub branch: ClosureBranch,
    pub estimate: Complex64,
    pub exact: Complex64,
    pub error: f64,
    pub r_plus_l2: f64,
    pub r_minus_l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub axis: usize,
    pub rows: Vec<UniquenessRow>,
    /// Per frequency, log-log slope of the error against `|η|`.
    pub slopes: Vec<(Vec<i64>, Option<f64>)>,
}

/// Slice modes `ξ_j = 0` estimated with the exact-phase pair `u_±` for each
/// `α`, on a uniform mesh.
pub fn uniqueness_check(
    q1: Potential,
    q2: Potential,
    sigma: &SigmaSet,
    domain: &Domain,
    axis: usize,
    xis: &[Vec<i64>],
    alphas: &[f64],
) -> Result<UniquenessReport> {
    if !sigma.is_uniform() {
        return Err(Error::Unsupported("the uniqueness check needs the uniform mesh".into()));
    }
    let d = sigma.lattice().dim();
    if axis >= d {
        return Err(Error::DirectionOutOfRange { index: axis, count: d });
    }
    for xi in xis {
        if xi.len() != d || xi[axis] != 0 {
            return Err(Error::OutOfRange(format!("frequency {xi:?} is not on the slice ξ_{axis} = 0")));
        }
    }
    let ctx = ReconstructionContext::new(q1, q2, sigma, domain)?;
    let h = sigma.lattice().h();
    let jobs: Vec<(&Vec<i64>, f64)> = xis.iter().flat_map(|xi| alphas.iter().map(move |&a| (xi, a))).collect();
    let rows: Vec<UniquenessRow> = jobs
        .par_iter()
        .map(|&(xi, alpha)| {
            let xf = xi_f64(xi);
            let beta: Vec<f64> = xf.iter().map(|x| -PI * x).collect();
            let phase = uniform_phase_on_axis(&beta, alpha, h, axis)?;
            let pair = uniform_cgo_pair(&ctx.q1, &ctx.q2, &phase, sigma, domain)?;
            let pairing = ctx.boundary_pairing(&pair.plus.u, &pair.minus.u)?;
            let estimate = -ctx.centroid_factor(&xf) * pairing;
            let exact = fourier_coefficient(ctx.difference(), &xf);
            Ok(UniquenessRow {
                xi: xi.clone(),
                alpha,
                eta_norm: phase.norm(),
                branch: phase.branch,
                estimate,
                exact,
                error: (estimate - exact).norm(),
                r_plus_l2: norm_l2(&pair.plus.r_tilde),
                r_minus_l2: norm_l2(&pair.minus.r_tilde),
            })
        })
        .collect::<Result<_>>()?;
    let slopes = xis
        .iter()
        .map(|xi| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| &r.xi == xi && r.error > 0.0)
                .map(|r| (r.eta_norm.ln(), r.error.ln()))
                .collect();
            let slope = (pts.len() >= 2).then(|| {
                let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                fit_slope(&x, &y)
            });
            (xi.clone(), slope)
        })
        .collect();
    Ok(UniquenessReport { axis, rows, slopes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triple_example() {
        let t = orthogonal_triple(&[1.0, 0.0, 0.0], 7.0).unwrap();
        assert_eq!(t.beta, vec![-2.0 * PI, 0.0, 0.0]);
        assert_eq!(t.s, vec![0.0, 7.0, 0.0]);
        assert!((t.delta[2] - (49.0 - 4.0 * PI * PI).sqrt()).abs() < 1e-12);
        assert!((t.delta[2] - 3.0857).abs() < 1e-4);
    }

    #[test]
    fn triple_rejects_short_s_and_low_dimension() {
        assert!(orthogonal_triple(&[1.0, 0.0, 0.0], 6.0).is_err());
        assert!(orthogonal_triple(&[0.0, 0.0], 6.0).is_err());
    }

    #[test]
    fn mu_examples() {
        let a = select_mu(1e-40, 1e-2, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(a.regime, Regime::SmallDistance);
        assert!((a.mu_tilde - 0.1).abs() < 1e-15);
        let b = select_mu(1e-3, 1e-2, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(b.regime, Regime::LargeDistance);
        assert!((b.s_choice - 2.302_585_092_994_046).abs() < 1e-12);
        let z = select_mu(0.0, 1e-2, 0.0, 0.0, 1.0).unwrap();
        assert_eq!((z.regime, z.mu), (Regime::SmallDistance, z.mu_tilde));
        assert!(select_mu(1.0, 1e-2, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn frequency_ball() {
        let f = frequencies_within(3, 1.0);
        assert_eq!(f.len(), 7);
        assert_eq!(f[0], vec![0, 0, 0]);
        assert_eq!(frequencies_within(2, 1.5).len(), 9);
    }

    #[test]
    fn envelope_slope_matches_formula() {
        for r in [1.0, 2.0, 4.0] {
            let got = envelope_exponent(r, 3, 2.0, 0.5);
            assert!((got - 2.0 * r / (2.0 * r + 3.0)).abs() < 1e-3, "{r}: {got}");
        }
    }
}
