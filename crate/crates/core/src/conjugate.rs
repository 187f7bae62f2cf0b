//! Conjugated operator `e^{-s·x} Δ_h e^{s·x}`, its symmetric/skew split and
//! the numerical harness for the Carleman lower bounds.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{DirectionSet, Field, Lattice, PointSet, ScalarField, Value};
use crate::linalg::{self, CsrMatrix};
use crate::sigma::{assemble_stencil, laplacian_matrix, SigmaSet};

/// Hyperbolic coefficients per direction for a weight vector `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlemanCoeffs {
    pub s: Vec<f64>,
    pub h: f64,
    /// `ch(h s·e_i)`
    pub kappa: Vec<f64>,
    /// `(4/h²) sh²(h s·e_i / 2)`
    pub p: Vec<f64>,
    /// `sh(h s·e_i) / h`
    pub g: Vec<f64>,
}

pub fn carleman_coeffs(s: &[f64], lattice: &Lattice, dirs: &DirectionSet) -> CarlemanCoeffs {
    let h = lattice.h();
    let mut kappa = Vec::with_capacity(dirs.len());
    let mut p = Vec::with_capacity(dirs.len());
    let mut g = Vec::with_capacity(dirs.len());
    for i in 0..dirs.len() {
        let t = h * dirs.dot(i, s);
        kappa.push(t.cosh());
        p.push(4.0 / (h * h) * (0.5 * t).sinh().powi(2));
        g.push(t.sinh() / h);
    }
    CarlemanCoeffs { s: s.to_vec(), h, kappa, p, g }
}

/// Weight fields on `K^i` used in the multiplier estimates.
#[derive(Clone, Debug)]
pub struct RCoeffs {
    /// `σ ch²(h s·e_i / 2)`
    pub r1: Vec<ScalarField>,
    /// `-(4σ/h²) sh²(h s·e_i / 2)`
    pub r2: Vec<ScalarField>,
    /// `-(σ/h) sh(h s·e_i)`
    pub r3: Vec<ScalarField>,
}

pub fn r_coeffs(s: &[f64], sigma: &SigmaSet) -> RCoeffs {
    let dirs = sigma.directions();
    let h = sigma.lattice().h();
    let mut r1 = Vec::new();
    let mut r2 = Vec::new();
    let mut r3 = Vec::new();
    for i in 0..dirs.len() {
        let t = h * dirs.dot(i, s);
        let f = sigma.field(i);
        r1.push(f.map(|v| v * (0.5 * t).cosh().powi(2)));
        r2.push(f.map(|v| -4.0 * v / (h * h) * (0.5 * t).sinh().powi(2)));
        r3.push(f.map(|v| -v / h * t.sinh()));
    }
    RCoeffs { r1, r2, r3 }
}

fn sym_coeffs(cc: &CarlemanCoeffs, i: usize, sp: f64, sm: f64) -> (f64, f64, f64) {
    let h2 = cc.h * cc.h;
    let k = cc.kappa[i];
    (k * sp / h2, -k * (sp + sm) / h2 + 0.5 * cc.p[i] * (sp + sm), k * sm / h2)
}

fn skew_coeffs(cc: &CarlemanCoeffs, i: usize, sp: f64, sm: f64) -> (f64, f64, f64) {
    let g = cc.g[i] / cc.h;
    (g * sp, 0.0, -g * sm)
}

/// `S = Σ_i S^i` and `A = Σ_i A^i` as matrices from `C_c` functions on
/// `cols` (zero elsewhere) to values on the interior of `K`.
#[derive(Clone, Debug)]
pub struct SymSkew {
    pub rows: PointSet,
    pub cols: PointSet,
    pub sym: CsrMatrix,
    pub skew: CsrMatrix,
}

pub fn decompose_sym_skew(s: &[f64], sigma: &SigmaSet, cols: &PointSet) -> Result<SymSkew> {
    let lattice = sigma.lattice();
    let dirs = sigma.directions();
    let cc = carleman_coeffs(s, lattice, dirs);
    let rows = lattice.full().interior(dirs);
    let sym = assemble_stencil(sigma, &rows, cols, |i, sp, sm| sym_coeffs(&cc, i, sp, sm))?;
    let skew = assemble_stencil(sigma, &rows, cols, |i, sp, sm| skew_coeffs(&cc, i, sp, sm))?;
    Ok(SymSkew { rows, cols: cols.clone(), sym, skew })
}

/// `Δ_{s,h}` assembled in factored form, rows on `K̊`, columns on `cols`.
pub fn conjugated_matrix(s: &[f64], sigma: &SigmaSet, cols: &PointSet) -> Result<CsrMatrix> {
    let rows = sigma.lattice().full().interior(sigma.directions());
    conjugated_block(s, sigma, &rows, cols)
}

/// `Δ_{s,h}` with rows restricted to `rows` (which must lie in `K̊`).
pub fn conjugated_block(s: &[f64], sigma: &SigmaSet, rows: &PointSet, cols: &PointSet) -> Result<CsrMatrix> {
    let lattice = sigma.lattice();
    let dirs = sigma.directions();
    let cc = carleman_coeffs(s, lattice, dirs);
    assemble_stencil(sigma, rows, cols, |i, sp, sm| {
        let a = sym_coeffs(&cc, i, sp, sm);
        let b = skew_coeffs(&cc, i, sp, sm);
        (a.0 + b.0, a.1 + b.1, a.2 + b.2)
    })
}

/// Real matrix times a real or complex vector.
pub fn apply_matrix<T: Value>(m: &CsrMatrix, x: &[T]) -> Vec<T> {
    (0..m.nrows())
        .map(|r| {
            let mut acc = T::zero();
            for (c, v) in m.row(r) {
                acc += x[c] * v;
            }
            acc
        })
        .collect()
}

fn check_compact<T: Value>(u: &Field<T>, dirs: &DirectionSet) -> Result<()> {
    let interior = u.lattice().full().interior(dirs);
    for (idx, &k) in u.domain().keys().iter().enumerate() {
        if !interior.contains_key(k) && u.values()[idx] != T::zero() {
            return Err(Error::DomainMismatch(
                "input must vanish on the boundary of K".into(),
            ));
        }
    }
    Ok(())
}

/// `Δ_{s,h} u` on `K` (zero on `∂K`) through the hyperbolic coefficients.
pub fn conjugated_apply<T: Value>(u: &Field<T>, s: &[f64], sigma: &SigmaSet) -> Result<Field<T>> {
    check_compact(u, sigma.directions())?;
    let m = conjugated_matrix(s, sigma, u.domain())?;
    let interior = sigma.lattice().full().interior(sigma.directions());
    let out = Field::new(interior, apply_matrix(&m, u.values()))?;
    out.extend_to(sigma.lattice().full())
}

/// `e^{-s·x} Δ_h (e^{s·x} u)` evaluated literally. Refuses weights whose
/// exponentials would overflow.
pub fn conjugated_apply_direct<T: Value>(
    u: &Field<T>,
    s: &[f64],
    sigma: &SigmaSet,
) -> Result<Field<T>> {
    check_compact(u, sigma.directions())?;
    let s_norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    let full = sigma.lattice().full();
    let span = s_norm * full.diameter();
    if span > 700.0 {
        return Err(Error::Overflow(span));
    }
    let weighted = u.extend_to(full.clone())?;
    let phi: Vec<f64> = (0..full.len())
        .map(|i| full.position(i).iter().zip(s).map(|(a, b)| a * b).sum())
        .collect();
    let mut weighted = weighted;
    for (v, p) in weighted.values_mut().iter_mut().zip(&phi) {
        *v = *v * p.exp();
    }
    let lap = crate::calculus::laplacian(&weighted, sigma)?;
    let mut out = lap.extend_to(full.clone())?;
    for (v, p) in out.values_mut().iter_mut().zip(&phi) {
        *v = *v * (-p).exp();
    }
    Ok(out)
}

/// `Â u = 2 Σ_i (s·e_i) a_i(σ^i) a_i d_i u`, rows on `K̊`, columns on `cols`.
pub fn poincare_matrix(s: &[f64], sigma: &SigmaSet, cols: &PointSet) -> Result<CsrMatrix> {
    let dirs = sigma.directions();
    let h = sigma.lattice().h();
    let rows = sigma.lattice().full().interior(dirs);
    assemble_stencil(sigma, &rows, cols, |i, sp, sm| {
        let c = dirs.dot(i, s) * (sp + sm) / (2.0 * h);
        (c, 0.0, -c)
    })
}

fn s_norm(s: &[f64]) -> f64 {
    s.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn require_double_interior(sigma: &SigmaSet, b: &PointSet) -> Result<PointSet> {
    let dirs = sigma.directions();
    let kdd = sigma.lattice().full().interior(dirs).interior(dirs);
    if !b.is_subset_of(&kdd) {
        return Err(Error::NotInterior("enclosure must lie in the double interior of K".into()));
    }
    let cols = b.interior(dirs);
    if cols.is_empty() {
        return Err(Error::DomainMismatch("no compactly supported functions on the enclosure".into()));
    }
    Ok(cols)
}

/// Smallest value of `‖Â u‖ / (|s| ‖u‖)` over `u ∈ C_c(B)`.
pub fn verify_poincare(s: &[f64], sigma: &SigmaSet, b: &PointSet) -> Result<f64> {
    let cols = require_double_interior(sigma, b)?;
    let m = poincare_matrix(s, sigma, &cols)?;
    let gram = m.gram().to_dense();
    let lmin = linalg::symmetric_eigenvalues(&gram)[0].max(0.0);
    Ok(lmin.sqrt() / s_norm(s))
}

/// Eigenvalue of largest magnitude of `X v = λ Y v`, with the joint kernel
/// of `Y` projected out when `Y` is only semidefinite.
fn pencil_max_abs(x: &DMatrix<f64>, y: &DMatrix<f64>, dense_limit: usize, tol: f64) -> Result<f64> {
    if Cholesky::new(y.clone()).is_some() {
        return linalg::max_abs_pencil_eigenvalue(x, y, dense_limit, tol);
    }
    let eig = SymmetricEigen::new((y + y.transpose()) * 0.5);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&k| eig.eigenvalues[k] > 1e-12 * top)
        .collect();
    if keep.is_empty() {
        return Ok(0.0);
    }
    let q = eig.eigenvectors.select_columns(&keep);
    let xr = q.transpose() * x * &q;
    let yr = q.transpose() * y * &q;
    linalg::max_abs_pencil_eigenvalue(&xr, &yr, usize::MAX, tol)
}

/// Largest `|(Su, Au)| / (‖Su‖² + ‖Au‖²)` over `u ∈ C_c(B)`.
pub fn verify_commutator(s: &[f64], sigma: &SigmaSet, b: &PointSet) -> Result<f64> {
    let cols = require_double_interior(sigma, b)?;
    commutator_ratio(s, sigma, &cols, 2000, 1e-10)
}

fn commutator_ratio(s: &[f64], sigma: &SigmaSet, cols: &PointSet, dense_limit: usize, tol: f64) -> Result<f64> {
    if s.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let ss = decompose_sym_skew(s, sigma, cols)?;
    let sd = ss.sym.to_dense();
    let ad = ss.skew.to_dense();
    let cross = sd.transpose() * &ad;
    let x = (&cross + cross.transpose()) * 0.5;
    let y = sd.transpose() * &sd + ad.transpose() * &ad;
    pencil_max_abs(&x, &y, dense_limit, tol)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Interior dimension up to which the pencils are reduced densely.
    pub dense_limit: usize,
    /// Relative tolerance on the extremal eigenvalue for the Lanczos path.
    pub tol: f64,
    pub commutator: bool,
    /// Also report `min ‖Δ_{s,h}u‖ / (|s| ‖u‖)`.
    pub l2_only: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { dense_limit: 600, tol: 1e-8, commutator: true, l2_only: true }
    }
}

/// One row of the Carleman scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub h: f64,
    pub eps_d: f64,
    pub eps_a: f64,
    pub s_norm: f64,
    /// `min ‖Δ_{s,h}u‖ / (|s|²‖u‖² + ‖u‖²_{Ḣ¹})^{1/2}`
    pub ratio_min: f64,
    /// Lower bound for `‖Δ_{s,h}u‖ / (|s|‖u‖ + ‖u‖_{Ḣ¹})`, i.e. `ratio_min / √2`.
    pub ratio_sum_lower: f64,
    pub l2_only_ratio: Option<f64>,
    pub commutator_ratio: Option<f64>,
}

fn scan_point(sigma: &SigmaSet, cols: &PointSet, s: &[f64], opts: &ScanOptions) -> Result<ScanRow> {
    let sn = s_norm(s);
    if sn == 0.0 {
        return Err(Error::OutOfRange("scan points need |s| > 0".into()));
    }
    let l = conjugated_matrix(s, sigma, cols)?;
    let kk = l.gram().to_dense();
    let energy = laplacian_matrix(sigma, cols, cols)?.scale(-1.0).to_dense();
    let n = cols.len();
    let mass = DMatrix::<f64>::identity(n, n) * (sn * sn) + &energy;
    let lmin = linalg::smallest_pencil_eigenvalue(&kk, &mass, opts.dense_limit, opts.tol)?;
    let ratio = lmin.max(0.0).sqrt();
    let l2_only = if opts.l2_only {
        let id = DMatrix::<f64>::identity(n, n);
        let l0 = linalg::smallest_pencil_eigenvalue(&kk, &id, opts.dense_limit, opts.tol)?;
        Some(l0.max(0.0).sqrt() / sn)
    } else {
        None
    };
    let commutator = if opts.commutator {
        Some(commutator_ratio(s, sigma, cols, opts.dense_limit, opts.tol)?)
    } else {
        None
    };
    let m = sigma.metrics();
    Ok(ScanRow {
        h: sigma.lattice().h(),
        eps_d: m.eps_d,
        eps_a: m.eps_a,
        s_norm: sn,
        ratio_min: ratio,
        ratio_sum_lower: ratio / std::f64::consts::SQRT_2,
        l2_only_ratio: l2_only,
        commutator_ratio: commutator,
    })
}

/// Minimal surrogate ratio over `C_c(B)` for every `s` in the grid.
/// Points are evaluated in parallel and returned in grid order.
pub fn carleman_constant_scan(
    sigma: &SigmaSet,
    b: &PointSet,
    s_grid: &[Vec<f64>],
    opts: &ScanOptions,
) -> Result<Vec<ScanRow>> {
    let cols = require_double_interior(sigma, b)?;
    s_grid.par_iter().map(|s| scan_point(sigma, &cols, s, opts)).collect()
}

/// `count` vectors along `dir` with log-spaced norms between `a` and `b`
/// (in either order).
pub fn log_spaced_grid(dir: &[f64], a: f64, b: f64, count: usize) -> Vec<Vec<f64>> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let unit = s_norm(dir);
    (0..count)
        .map(|k| {
            let t = if count == 1 { 0.0 } else { k as f64 / (count - 1) as f64 };
            let r = lo * (hi / lo).powf(t);
            dir.iter().map(|v| v / unit * r).collect()
        })
        .collect()
}

/// Empirical admissible-range constant: the largest `|s| / min(ε_d^{-1}, h^{-2/3})`
/// over scan rows whose ratio stays above half the best ratio.
pub fn admissible_range_constant(rows: &[ScanRow]) -> Option<f64> {
    let best = rows.iter().map(|r| r.ratio_min).fold(0.0f64, f64::max);
    rows.iter()
        .filter(|r| r.ratio_min >= 0.5 * best && best > 0.0)
        .map(|r| {
            let scale = if r.eps_d > 0.0 {
                (1.0 / r.eps_d).min(r.h.powf(-2.0 / 3.0))
            } else {
                r.h.powf(-2.0 / 3.0)
            };
            r.s_norm / scale
        })
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigma::build_sigma_uniform;

    #[test]
    fn coefficient_example() {
        let l = Lattice::new(1, 10).unwrap();
        let cc = carleman_coeffs(&[2.0], &l, &DirectionSet::canonical(1));
        assert!((cc.kappa[0] - 1.020_066_755_619_075_8).abs() < 1e-12);
        let z = carleman_coeffs(&[0.0], &l, &DirectionSet::canonical(1));
        assert_eq!((z.kappa[0], z.p[0], z.g[0]), (1.0, 0.0, 0.0));
    }

    #[test]
    fn grid_is_order_agnostic() {
        let a = log_spaced_grid(&[1.0, 1.0], 4.0, 1.0, 3);
        let b = log_spaced_grid(&[1.0, 1.0], 1.0, 4.0, 3);
        assert_eq!(a, b);
        assert!((s_norm(&a[1]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_has_no_commutator() {
        let l = Lattice::new(2, 8).unwrap();
        let sigma = build_sigma_uniform(l);
        let b = PointSet::index_box(l, &[2, 2], &[5, 5]).unwrap();
        assert_eq!(verify_commutator(&[0.0, 0.0], &sigma, &b).unwrap(), 0.0);
    }
}
