//! Complex geometrical optics solutions `u = e^{η·x}(1 + r)` of
//! `Δ_h u + q u = 0`, built from the Carleman-driven auxiliary solve.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::dtn::Potential;
use crate::lattice::{norm_l2, seminorm_h1, ComplexField, Field, Lattice, PointSet, ScalarField};
use crate::linalg::{minres, CsrMatrix};
use crate::sigma::{Domain, SigmaSet};

/// Columns of the auxiliary system above which the normal equations are
/// solved iteratively.
pub const AUX_DENSE_LIMIT: usize = 3000;
/// `σ_min(P*) / σ_max(P*)` below which the auxiliary solve is refused.
pub const AUX_COND_TOL: f64 = 1e-10;

/// How a phase was certified.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    /// `η·η = 0`.
    Null,
    /// `Σ sh²(h η·e_i / 2) = 0` on a uniform mesh.
    DiscreteHarmonic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgoPhase {
    pub eta: Vec<Complex64>,
    pub kind: PhaseKind,
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ sh²(h η_i / 2)` together with `Σ |sh²(h η_i / 2)|` as its scale.
pub fn discrete_harmonic_defect(eta: &[Complex64], h: f64) -> (Complex64, f64) {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for &z in eta {
        let t = (z * (0.5 * h)).sinh();
        let t2 = t * t;
        sum += t2;
        scale += t2.norm();
    }
    (sum, scale)
}

impl CgoPhase {
    /// Accepts `η` with `η·η = 0` to `1e-12` relative to `|η|²`.
    pub fn new(eta: Vec<Complex64>) -> Result<Self> {
        let n2: f64 = eta.iter().map(|z| z.norm_sqr()).sum();
        let dd = cdot(&eta, &eta);
        if dd.norm() > 1e-12 * n2.max(1.0) {
            return Err(Error::OutOfRange(format!("η·η = {dd} is not zero")));
        }
        Ok(Self { eta, kind: PhaseKind::Null })
    }

    /// Accepts `η` with `e^{η·x}` discrete-harmonic on a uniform mesh of step `h`.
    pub fn discrete_harmonic(eta: Vec<Complex64>, h: f64) -> Result<Self> {
        let (sum, scale) = discrete_harmonic_defect(&eta, h);
        if sum.norm() > 1e-12 * scale.max(1.0) {
            return Err(Error::OutOfRange(format!("Σ sh²(hη/2) = {sum} is not zero")));
        }
        Ok(Self { eta, kind: PhaseKind::DiscreteHarmonic })
    }

    /// `η = s + i α` with `|α| = |s|`, `α ⊥ s`.
    pub fn from_parts(s: &[f64], alpha: &[f64]) -> Result<Self> {
        Self::new(s.iter().zip(alpha).map(|(&a, &b)| Complex64::new(a, b)).collect())
    }

    pub fn s(&self) -> Vec<f64> {
        self.eta.iter().map(|z| z.re).collect()
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.eta.iter().map(|z| z.im).collect()
    }

    pub fn s_norm(&self) -> f64 {
        self.eta.iter().map(|z| z.re * z.re).sum::<f64>().sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.eta.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Canonical phase `η = t e_j + i a e_k`, `a = (2/h) asin(sh(h t / 2))`, whose
/// exponential is discrete-harmonic for the uniform stencil.
pub fn exact_harmonic_phase(dim: usize, h: f64, t: f64, real_axis: usize, imag_axis: usize) -> Result<CgoPhase> {
    if real_axis >= dim || imag_axis >= dim || real_axis == imag_axis {
        return Err(Error::OutOfRange("axes must be distinct and below the dimension".into()));
    }
    let sh = (0.5 * h * t).sinh();
    if sh.abs() > 1.0 {
        return Err(Error::OutOfRange(format!(
            "no oscillating partner for |s| = {t} at h = {h}: sh(h s / 2) = {sh} exceeds 1"
        )));
    }
    let a = 2.0 / h * sh.asin();
    let mut eta = vec![Complex64::new(0.0, 0.0); dim];
    eta[real_axis] = Complex64::new(t, 0.0);
    eta[imag_axis] = Complex64::new(0.0, a);
    CgoPhase::discrete_harmonic(eta, h)
}

/// `e^{-η·x} Δ_h e^{η·x}` at every node of `K̊`, in closed form:
/// `Σ_i h^{-2} [σ₊ (e^{h η·e_i} - 1) - σ₋ (1 - e^{-h η·e_i})]`.
pub fn harmonic_defect_field(eta: &[Complex64], sigma: &SigmaSet) -> Result<ComplexField> {
    let lattice = sigma.lattice();
    let dirs = sigma.directions();
    let h = lattice.h();
    let interior = lattice.full().interior(dirs);
    let steps: Vec<(Complex64, Complex64)> = (0..dirs.len())
        .map(|i| {
            let z = dirs.dot_complex(i, eta) * h;
            (z.exp() - 1.0, 1.0 - (-z).exp())
        })
        .collect();
    let inv_h2 = 1.0 / (h * h);
    let mut values = Vec::with_capacity(interior.len());
    for &x in interior.keys() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &(up, down)) in steps.iter().enumerate() {
            let (sp, sm) = sigma.weights_around(i, x)?;
            acc += (up * sp - down * sm) * inv_h2;
        }
        values.push(acc);
    }
    Field::new(interior, values)
}

/// `‖e^{-Φ_η} Δ_h e^{Φ_η}‖_{L∞(K̊)}`.
pub fn harmonic_defect(eta: &[Complex64], sigma: &SigmaSet) -> Result<f64> {
    Ok(harmonic_defect_field(eta, sigma)?.max_abs())
}

/// Result of the auxiliary solve `Δ_{s,h} u + q u = f` on `W̊`.
#[derive(Clone, Debug)]
pub struct AuxSolution {
    /// `u = P*V` on `B`.
    pub u_b: ComplexField,
    /// Restriction to `W`.
    pub u: ComplexField,
    /// Smallest singular value of `P*` (estimate).
    pub sigma_min: f64,
    /// `‖Δ_{s,h} u + q u - f‖_{ℓ²(W̊)} / ‖f‖_{ℓ²(W̊)}`.
    pub residual: f64,
}

fn diag_on(rows: &PointSet, cols: &PointSet, q: &ScalarField) -> CsrMatrix {
    let mut t = Vec::new();
    for (&k, &v) in q.domain().keys().iter().zip(q.values()) {
        if let (Some(r), Some(c)) = (rows.index_of_key(k), cols.index_of_key(k)) {
            t.push((r, c, v));
        }
    }
    CsrMatrix::from_triplets(rows.len(), cols.len(), t)
}

fn power_sigma_max(r: &DMatrix<f64>) -> f64 {
    let n = r.ncols();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut est = 0.0;
    for _ in 0..50 {
        let w = r.tr_mul(&(r * &v));
        let nrm = w.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        v = w / nrm;
        if (nrm - est).abs() <= 1e-8 * nrm {
            est = nrm;
            break;
        }
        est = nrm;
    }
    est.sqrt()
}

fn inverse_sigma_min(r: &DMatrix<f64>) -> f64 {
    let n = r.ncols();
    let rt = r.transpose();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64 * 0.618_033_988_75).fract() - 0.5));
    v /= v.norm();
    let mut est = f64::INFINITY;
    for _ in 0..60 {
        let Some(y) = rt.solve_lower_triangular(&v) else { return 0.0 };
        let Some(x) = r.solve_upper_triangular(&y) else { return 0.0 };
        let nrm = x.norm();
        if !nrm.is_finite() || nrm == 0.0 {
            return 0.0;
        }
        let lam = 1.0 / nrm;
        v = x / nrm;
        if (lam - est).abs() <= 1e-8 * lam {
            return lam.sqrt();
        }
        est = lam;
    }
    est.sqrt()
}

/// Solves `Δ_{s,h} u + q u = f` on `W̊` as `u = P*V`, where `P* = Δ_{-s,h} + q`
/// maps `C_c(B)` to `C(B)` and `V` solves `(P*)ᵀ P* V = f`. `f` and `q` are
/// extended by zero to `B`. The dense path uses a QR factorization of `P*`
/// so that `u = Q R^{-T} f`.
pub fn aux_solve(
    f: &ComplexField,
    q: &Potential,
    s: &[f64],
    sigma: &SigmaSet,
    domain: &Domain,
) -> Result<AuxSolution> {
    let dirs = sigma.directions();
    let w_int = domain.w.interior(dirs);
    if !f.domain().same_points(&w_int) {
        return Err(Error::DomainMismatch("right-hand side must live on the interior of W".into()));
    }
    if !q.w().same_points(&domain.w) {
        return Err(Error::DomainMismatch("potential and domain disagree on W".into()));
    }
    let b = &domain.b;
    let b_int = domain.b_interior(dirs);
    let pstar = crate::conjugate::conjugated_block(&s.iter().map(|v| -v).collect::<Vec<_>>(), sigma, b, &b_int)?
        .add_scaled(&diag_on(b, &b_int, q.q()), 1.0);
    let n = b_int.len();
    let mut f_re = vec![0.0; n];
    let mut f_im = vec![0.0; n];
    for (&k, v) in f.domain().keys().iter().zip(f.values()) {
        let c = b_int.index_of_key(k).expect("W̊ ⊂ B̊");
        f_re[c] = v.re;
        f_im[c] = v.im;
    }
    let f_norm = f.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let (u_re, u_im, sigma_min) = if n <= AUX_DENSE_LIMIT {
        let qr = pstar.to_dense().qr();
        let r = qr.r();
        let smax = power_sigma_max(&r);
        let smin = inverse_sigma_min(&r);
        if !(smin > AUX_COND_TOL * smax) {
            return Err(Error::IllConditioned { sigma_min: smin });
        }
        let rhs = DMatrix::from_columns(&[DVector::from_vec(f_re), DVector::from_vec(f_im)]);
        let y = r
            .transpose()
            .solve_lower_triangular(&rhs)
            .ok_or(Error::IllConditioned { sigma_min: smin })?;
        let u = qr.q() * y;
        (u.column(0).iter().copied().collect::<Vec<_>>(), u.column(1).iter().copied().collect(), smin)
    } else {
        let pt = pstar.transpose();
        let apply = |x: &[f64]| pt.matvec(&pstar.matvec(x));
        let lo = crate::linalg::lanczos_extreme(n, &apply, |x| x.to_vec(), crate::linalg::Extreme::Smallest, 1e-6, 300)?;
        let hi = crate::linalg::lanczos_extreme(n, &apply, |x| x.to_vec(), crate::linalg::Extreme::Largest, 1e-6, 100)?;
        let smin = lo.value.max(0.0).sqrt();
        if !(smin > AUX_COND_TOL * hi.value.sqrt()) {
            return Err(Error::IllConditioned { sigma_min: smin });
        }
        let mut parts = Vec::new();
        for rhs in [&f_re, &f_im] {
            let out = minres(apply, rhs, 1e-12, 20 * n + 200);
            if !out.converged {
                return Err(Error::Numerical(format!(
                    "normal equations stalled at relative residual {:e}",
                    out.relative_residual
                )));
            }
            parts.push(pstar.matvec(&out.x));
        }
        let u_im = parts.pop().unwrap();
        (parts.pop().unwrap(), u_im, smin)
    };
    let values: Vec<Complex64> = u_re.iter().zip(&u_im).map(|(&a, &b)| Complex64::new(a, b)).collect();
    let u_b = Field::new(b.clone(), values)?;
    let u = u_b.restrict(&domain.w)?;
    // residual on W̊
    let p = crate::conjugate::conjugated_block(s, sigma, &w_int, b)?.add_scaled(&diag_on(&w_int, b, q.q()), 1.0);
    let pu = crate::conjugate::apply_matrix(&p, u_b.values());
    let res = pu
        .iter()
        .zip(f.values())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let residual = if f_norm > 0.0 { res / f_norm } else { res };
    Ok(AuxSolution { u_b, u, sigma_min, residual })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgoDiagnostics {
    pub r_l2: f64,
    pub r_h1_semi: f64,
    /// `‖Δ_h u + q u‖_{ℓ²(W̊)} / (h^{-2} ‖u‖_{ℓ²(W)})`.
    pub residual: f64,
    /// Residual of the auxiliary solve relative to its right-hand side.
    pub aux_residual: f64,
    pub sigma_min: f64,
    pub s_norm: f64,
    /// `1 + |s|² ε_a + |s|⁴ h²`.
    pub envelope: f64,
    /// `‖f‖_{L²(W̊)}` of the remainder equation.
    pub forcing_l2: f64,
    /// `‖r̃‖_{Ḣ¹} / ‖r̃‖_{L²}`, a frequency indicator of the remainder.
    pub frequency_ratio: f64,
    pub centroid_shift: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct CgoSolution {
    pub phase: CgoPhase,
    /// `u` on `W`, phases measured from `centroid_shift`.
    pub u: ComplexField,
    /// `r̃` with `u(x) = e^{η·(x - x_c)} (1 + r̃(x))`.
    pub r_tilde: ComplexField,
    pub diagnostics: CgoDiagnostics,
}

impl CgoSolution {
    /// `e^{η·(x - x_c)}` on `W`.
    pub fn exponential(&self) -> ComplexField {
        let xc = self.diagnostics.centroid_shift.clone();
        let eta = self.phase.eta.clone();
        Field::from_fn(self.u.domain_arc().clone(), move |x| phase_at(&eta, x, &xc).exp())
    }

    /// Largest pointwise gap in `u = e^{η·(x - x_c)}(1 + r̃)` relative to `|u|`.
    pub fn identity_gap(&self) -> f64 {
        let e = self.exponential();
        self.u
            .values()
            .iter()
            .zip(e.values())
            .zip(self.r_tilde.values())
            .map(|((&u, &e), &r)| (u - e * (1.0 + r)).norm() / u.norm().max(e.norm()).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

fn phase_at(eta: &[Complex64], x: &[f64], xc: &[f64]) -> Complex64 {
    eta.iter().zip(x.iter().zip(xc)).map(|(e, (a, b))| e * (a - b)).sum()
}

/// Lower end of the admissible `|s|` range used for warnings: `2(m + 1)`.
pub fn default_s0(m: f64) -> f64 {
    2.0 * (m + 1.0)
}

/// CGO solution of `Δ_h u + q u = 0` on `W̊` of the form
/// `u = e^{η·(x - x_c)} (1 + r̃)`, `x_c` the centroid of `W`.
pub fn cgo_solve(q: &Potential, phase: &CgoPhase, sigma: &SigmaSet, domain: &Domain) -> Result<CgoSolution> {
    let lattice = *sigma.lattice();
    let dirs = sigma.directions();
    let h = lattice.h();
    if phase.eta.len() != lattice.dim() {
        return Err(Error::DomainMismatch("phase dimension differs from the lattice".into()));
    }
    let w = &domain.w;
    let w_int = w.interior(dirs);
    let xc = w.centroid();
    let s = phase.s();
    let alpha = phase.alpha();
    let s_norm = phase.s_norm();
    let metrics = sigma.metrics();

    let mut warnings = Vec::new();
    if phase.kind == PhaseKind::DiscreteHarmonic && !sigma.is_uniform() {
        warnings.push("discrete-harmonic phase used on a non-uniform mesh".to_string());
    }
    let s0 = default_s0(q.m());
    if s_norm < s0 {
        warnings.push(format!("|s| = {s_norm:.4} below s0 = {s0:.4}"));
    }
    let upper = (1.0 / metrics.eps_d).min(h.powf(-2.0 / 3.0));
    if phase.kind == PhaseKind::Null && s_norm > upper {
        warnings.push(format!("|s| = {s_norm:.4} above min(1/ε_d, h^(-2/3)) = {upper:.4}"));
    }

    // f = -e^{iα·(x - x_c)} (e^{-Φ} Δ_h e^{Φ} + q) on W̊
    let defect = harmonic_defect_field(&phase.eta, sigma)?;
    let q_int = q.q();
    let mut f_vals = Vec::with_capacity(w_int.len());
    for (idx, &k) in w_int.keys().iter().enumerate() {
        let x = lattice.position(k);
        let osc: f64 = alpha.iter().zip(x.iter().zip(&xc)).map(|(a, (p, c))| a * (p - c)).sum();
        let dv = defect.get(k).expect("W̊ ⊂ K̊");
        f_vals.push(-Complex64::from_polar(1.0, osc) * (dv + q_int.values()[idx]));
    }
    let f = Field::new(w_int.clone(), f_vals)?;
    let forcing_l2 = norm_l2(&f);
    let aux = aux_solve(&f, q, &s, sigma, domain)?;

    let mut u_vals = Vec::with_capacity(w.len());
    let mut r_vals = Vec::with_capacity(w.len());
    for (idx, &k) in w.keys().iter().enumerate() {
        let x = lattice.position(k);
        let ph = phase_at(&phase.eta, &x, &xc);
        let real: f64 = s.iter().zip(x.iter().zip(&xc)).map(|(a, (p, c))| a * (p - c)).sum();
        let osc = ph.im;
        let r = aux.u.values()[idx];
        u_vals.push(ph.exp() + r * real.exp());
        r_vals.push(r * Complex64::from_polar(1.0, -osc));
    }
    let u = Field::new(w.clone(), u_vals)?;
    let r_tilde = Field::new(w.clone(), r_vals)?;

    let op = crate::dtn::interior_operator(w, Some(q_int), sigma)?;
    let res = crate::conjugate::apply_matrix(&op, u.values());
    let res_norm = res.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let u_norm = u.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let residual = if u_norm > 0.0 { res_norm * h * h / u_norm } else { res_norm };

    let r_l2 = norm_l2(&r_tilde);
    let r_h1_semi = seminorm_h1(&r_tilde, sigma)?;
    let diagnostics = CgoDiagnostics {
        r_l2,
        r_h1_semi,
        residual,
        aux_residual: aux.residual,
        sigma_min: aux.sigma_min,
        s_norm,
        envelope: 1.0 + s_norm.powi(2) * metrics.eps_a + s_norm.powi(4) * h * h,
        forcing_l2,
        frequency_ratio: if r_l2 > 0.0 { r_h1_semi / r_l2 } else { 0.0 },
        centroid_shift: xc,
        warnings,
    };
    Ok(CgoSolution { phase: phase.clone(), u, r_tilde, diagnostics })
}

/// Branch taken when solving `ch(h η_{j0}) = R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosureBranch {
    /// `|R| ≤ 1`: `η_{j0} = i arccos(R) / h`.
    Oscillating,
    /// `R < -1`: `η_{j0} = (iπ + arcosh(-R)) / h`.
    Alternating,
    /// `R > 1`: `η_{j0} = arcosh(R) / h`.
    Growing,
}

/// Phase `η_h` such that both `iβ + η_h` and `iβ - η_h` are discrete-harmonic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformPhase {
    pub beta: Vec<f64>,
    pub alpha: f64,
    pub eta: Vec<Complex64>,
    /// Axis with `β_{j0} = 0`.
    pub j0: usize,
    /// Unit vector orthogonal to `Σ sin(hβ_j) e_j` with `a_{j0} = 0`.
    pub a: Vec<f64>,
    pub closure: f64,
    pub branch: ClosureBranch,
}

impl UniformPhase {
    pub fn plus(&self) -> Vec<Complex64> {
        self.beta.iter().zip(&self.eta).map(|(&b, &e)| Complex64::new(0.0, b) + e).collect()
    }

    pub fn minus(&self) -> Vec<Complex64> {
        self.beta.iter().zip(&self.eta).map(|(&b, &e)| Complex64::new(0.0, b) - e).collect()
    }

    pub fn norm(&self) -> f64 {
        self.eta.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `Σ sh(h η_j) sin(h β_j)`.
    pub fn orthogonality_defect(&self, h: f64) -> Complex64 {
        self.eta.iter().zip(&self.beta).map(|(&e, &b)| (e * h).sinh() * (h * b).sin()).sum()
    }
}

/// Solves `sh(h η_j) = h α a_j` (`j ≠ j0`) and the `ch` closure for `η_{j0}`.
/// The axis `j0` is the first with `β_{j0} = 0`.
pub fn uniform_phase(beta: &[f64], alpha: f64, h: f64) -> Result<UniformPhase> {
    let Some(j0) = beta.iter().position(|&b| b == 0.0) else {
        return Err(Error::Unsupported(
            "β has no zero component; no discrete-harmonic pair is available".into(),
        ));
    };
    uniform_phase_on_axis(beta, alpha, h, j0)
}

pub fn uniform_phase_on_axis(beta: &[f64], alpha: f64, h: f64, j0: usize) -> Result<UniformPhase> {
    let d = beta.len();
    if j0 >= d || beta[j0] != 0.0 {
        return Err(Error::Unsupported(format!("β must vanish along axis {j0}")));
    }
    let b: Vec<f64> = beta.iter().map(|&v| (h * v).sin()).collect();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut a = None;
    for p in (0..d).filter(|&p| p != j0) {
        let mut v = vec![0.0; d];
        v[p] = 1.0;
        if b_norm > 0.0 {
            let c = b[p] / b_norm;
            for (vi, bi) in v.iter_mut().zip(&b) {
                *vi -= c * bi / b_norm;
            }
        }
        v[j0] = 0.0;
        let n = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if n > 1e-8 {
            a = Some(v.into_iter().map(|t| t / n).collect::<Vec<_>>());
            break;
        }
    }
    let a = a.ok_or_else(|| Error::Unsupported("no unit vector orthogonal to the constraint; d ≥ 3 is needed".into()))?;
    let mut eta = vec![Complex64::new(0.0, 0.0); d];
    let mut closure = d as f64;
    for j in (0..d).filter(|&j| j != j0) {
        let x = (h * alpha * a[j]).asinh();
        eta[j] = Complex64::new(x / h, 0.0);
        closure -= x.cosh() * (h * beta[j]).cos();
    }
    let (value, branch) = if closure.abs() <= 1.0 {
        (Complex64::new(0.0, closure.acos() / h), ClosureBranch::Oscillating)
    } else if closure < -1.0 {
        (Complex64::new((-closure).acosh() / h, std::f64::consts::PI / h), ClosureBranch::Alternating)
    } else {
        (Complex64::new(closure.acosh() / h, 0.0), ClosureBranch::Growing)
    };
    eta[j0] = value;
    Ok(UniformPhase { beta: beta.to_vec(), alpha, eta, j0, a, closure, branch })
}

/// The pair `u_± = e^{iβ·x} e^{±η_h·x} (1 + r_±)` on a uniform mesh.
#[derive(Clone, Debug)]
pub struct UniformPair {
    pub phase: UniformPhase,
    pub plus: CgoSolution,
    pub minus: CgoSolution,
}

/// `u_+` solves with `q_plus`, `u_-` with `q_minus`.
pub fn uniform_cgo_pair(
    q_plus: &Potential,
    q_minus: &Potential,
    phase: &UniformPhase,
    sigma: &SigmaSet,
    domain: &Domain,
) -> Result<UniformPair> {
    if !sigma.is_uniform() {
        return Err(Error::Unsupported("the exact-phase pair needs the uniform mesh".into()));
    }
    let h = sigma.lattice().h();
    let plus = CgoPhase::discrete_harmonic(phase.plus(), h)?;
    let minus = CgoPhase::discrete_harmonic(phase.minus(), h)?;
    let plus = cgo_solve(q_plus, &plus, sigma, domain)?;
    let minus = cgo_solve(q_minus, &minus, sigma, domain)?;
    Ok(UniformPair { phase: phase.clone(), plus, minus })
}

/// Largest `|s|` for which an exact-phase partner exists: `sh(h|s|/2) ≤ 1`.
pub fn exact_phase_limit(lattice: &Lattice) -> f64 {
    2.0 / lattice.h() * 1f64.asinh()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigma::{build_domain_and_cutoff, build_sigma_uniform, Region};

    #[test]
    fn zero_phase_has_no_defect() {
        let l = Lattice::new(2, 6).unwrap();
        let sigma = build_sigma_uniform(l);
        let eta = vec![Complex64::new(0.0, 0.0); 2];
        assert_eq!(harmonic_defect(&eta, &sigma).unwrap(), 0.0);
    }

    #[test]
    fn defect_matches_hyperbolic_formula() {
        let l = Lattice::new(2, 20).unwrap();
        let h = l.h();
        let sigma = build_sigma_uniform(l);
        let eta = vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 2.0)];
        let got = harmonic_defect(&eta, &sigma).unwrap();
        let want = 4.0 / (h * h) * ((h).sinh().powi(2) - (h).sin().powi(2)).abs();
        assert!((got - want).abs() < 1e-12 * want.max(1.0), "{got} vs {want}");
        assert!((got - 6.67e-3).abs() < 1e-4);
    }

    #[test]
    fn phase_validation() {
        assert!(CgoPhase::from_parts(&[1.0, 0.0], &[0.0, 1.0]).is_ok());
        assert!(CgoPhase::from_parts(&[1.0, 0.0], &[0.0, 2.0]).is_err());
    }

    #[test]
    fn exact_phase_gives_zero_remainder() {
        let l = Lattice::new(2, 10).unwrap();
        let sigma = build_sigma_uniform(l);
        let dom = build_domain_and_cutoff(l, &sigma, &Region::cube(2, 0.3, 0.6), 2).unwrap();
        let q = Potential::zero(dom.w.clone(), &sigma).unwrap();
        let phase = exact_harmonic_phase(2, l.h(), 3.0, 0, 1).unwrap();
        let sol = cgo_solve(&q, &phase, &sigma, &dom).unwrap();
        assert!(sol.r_tilde.max_abs() < 1e-10);
        assert!(sol.diagnostics.residual < 1e-12);
    }

    #[test]
    fn missing_zero_component_is_unsupported() {
        assert!(matches!(uniform_phase(&[1.0, 1.0, 1.0], 3.0, 0.1), Err(Error::Unsupported(_))));
    }
}
