//! Sparse matrices, symmetric pencils and Krylov solvers used by the
//! stencil operators.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, LU};

use crate::error::{Error, Result};
use crate::lattice::Value;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles from `(row, col, value)` triplets, summing duplicates and
    /// dropping exact zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = Self { nrows, ncols, indptr, indices, data };
        m.prune();
        m
    }

    fn prune(&mut self) {
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut data = Vec::with_capacity(self.data.len());
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.data[k] != 0.0 {
                    indices.push(self.indices[k]);
                    data.push(self.data[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.data = data;
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), data: Vec::new() }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Entries of row `r` as `(col, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.data[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                out[c] += v * xr;
            }
        }
        out
    }

    pub fn transpose(&self) -> CsrMatrix {
        let t = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        CsrMatrix::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn scale(&self, s: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= s);
        m.prune();
        m
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &CsrMatrix, s: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, s * v)));
        CsrMatrix::from_triplets(self.nrows, self.ncols, t)
    }

    /// Sparse product `self * other`.
    pub fn mul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut triplets = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; other.ncols];
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !mark[c] {
                        mark[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                triplets.push((r, c, acc[c]));
                acc[c] = 0.0;
                mark[c] = false;
            }
            touched.clear();
        }
        CsrMatrix::from_triplets(self.nrows, other.ncols, triplets)
    }

    /// `selfᵀ self`.
    pub fn gram(&self) -> CsrMatrix {
        self.transpose().mul(self)
    }

    /// Selects rows and columns by index lists.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (j, &c) in cols.iter().enumerate() {
            col_map[c] = j;
        }
        let mut t = Vec::new();
        for (i, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if col_map[c] != usize::MAX {
                    t.push((i, col_map[c], v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), t)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|r| self.get(r, r)).collect()
    }
}

/// Which end of a spectrum to converge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extreme {
    Smallest,
    Largest,
    /// Largest in absolute value.
    Magnitude,
}

/// All eigenvalues (ascending) of the pencil `A x = λ B x`, `B` SPD.
pub fn dense_pencil_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = Cholesky::new(b.clone())
        .ok_or_else(|| Error::Numerical("pencil right-hand form is not positive definite".into()))?;
    let l = chol.l();
    // C = L^{-1} A L^{-T}
    let y = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(ev)
}

/// All eigenvalues (ascending) of a symmetric matrix.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

#[derive(Clone, Debug)]
pub struct LanczosOutcome {
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Extreme eigenvalue of an operator `T` that is self-adjoint in the inner
/// product `<x, y> = xᵀ M y`. `apply` computes `T x`, `m_apply` computes `M x`.
/// Full reorthogonalisation; deterministic start vector.
pub fn lanczos_extreme(
    n: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    m_apply: impl Fn(&[f64]) -> Vec<f64>,
    which: Extreme,
    tol: f64,
    max_iter: usize,
) -> Result<LanczosOutcome> {
    if n == 0 {
        return Err(Error::Numerical("empty operator".into()));
    }
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    // Deterministic, generic start vector.
    let mut q: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 * 0.618_033_988_75).fract() - 0.5))
        .collect();
    let mut mq = m_apply(&q);
    let nrm = dot(&q, &mq).sqrt();
    q.iter_mut().for_each(|v| *v /= nrm);
    mq.iter_mut().for_each(|v| *v /= nrm);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut mbasis: Vec<Vec<f64>> = vec![mq];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let max_iter = max_iter.min(n);
    let mut last = f64::NAN;
    for k in 0..max_iter {
        let mut w = apply(&basis[k]);
        let alpha = dot(&w, &mbasis[k]);
        alphas.push(alpha);
        for (qj, mqj) in basis.iter().zip(&mbasis) {
            let c = dot(&w, mqj);
            w.iter_mut().zip(qj).for_each(|(a, b)| *a -= c * b);
        }
        // second pass
        for (qj, mqj) in basis.iter().zip(&mbasis) {
            let c = dot(&w, mqj);
            w.iter_mut().zip(qj).for_each(|(a, b)| *a -= c * b);
        }
        let mw = m_apply(&w);
        let beta = dot(&w, &mw).max(0.0).sqrt();
        let m = alphas.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let pick = (0..m)
            .max_by(|&a, &b| {
                let (va, vb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
                let (ka, kb) = match which {
                    Extreme::Largest => (va, vb),
                    Extreme::Smallest => (-va, -vb),
                    Extreme::Magnitude => (va.abs(), vb.abs()),
                };
                ka.partial_cmp(&kb).unwrap()
            })
            .unwrap();
        let theta = eig.eigenvalues[pick];
        let residual = beta * eig.eigenvectors[(m - 1, pick)].abs();
        let scale = theta.abs().max(f64::MIN_POSITIVE);
        let exhausted = beta <= 1e-14 * alphas.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1.0);
        if residual <= tol * scale || exhausted || k + 1 == max_iter {
            let converged = residual <= tol * scale || exhausted;
            return Ok(LanczosOutcome { value: theta, iterations: k + 1, residual, converged });
        }
        last = theta;
        betas.push(beta);
        basis.push(w.iter().map(|v| v / beta).collect());
        mbasis.push(mw.iter().map(|v| v / beta).collect());
    }
    Ok(LanczosOutcome { value: last, iterations: max_iter, residual: f64::NAN, converged: false })
}

/// Smallest eigenvalue of the pencil `K x = λ M x` with `K`, `M` SPD.
/// Dense path: full reduction. Iterative path: Lanczos on `K^{-1} M`,
/// self-adjoint in the `M` inner product; returns `1 / θ_max`.
pub fn smallest_pencil_eigenvalue(
    k: &DMatrix<f64>,
    m: &DMatrix<f64>,
    dense_limit: usize,
    tol: f64,
) -> Result<f64> {
    let n = k.nrows();
    if n <= dense_limit {
        return Ok(dense_pencil_eigenvalues(k, m)?[0]);
    }
    let chol = Cholesky::new(k.clone())
        .ok_or_else(|| Error::Numerical("pencil left form is not positive definite".into()))?;
    let apply = |x: &[f64]| {
        let mx = m * DVector::from_column_slice(x);
        chol.solve(&mx).as_slice().to_vec()
    };
    let m_apply = |x: &[f64]| (m * DVector::from_column_slice(x)).as_slice().to_vec();
    let out = lanczos_extreme(n, apply, m_apply, Extreme::Largest, tol, 400)?;
    if !out.converged {
        return Err(Error::Numerical(format!(
            "Lanczos did not converge in {} steps (residual {:e})",
            out.iterations, out.residual
        )));
    }
    Ok(1.0 / out.value)
}

/// Eigenvalue of largest magnitude of the pencil `X x = λ Y x`, `Y` SPD.
pub fn max_abs_pencil_eigenvalue(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    dense_limit: usize,
    tol: f64,
) -> Result<f64> {
    let n = x.nrows();
    if n <= dense_limit {
        let ev = dense_pencil_eigenvalues(x, y)?;
        return Ok(ev.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let chol = Cholesky::new(y.clone())
        .ok_or_else(|| Error::Numerical("pencil right form is not positive definite".into()))?;
    let apply = |v: &[f64]| {
        let xv = x * DVector::from_column_slice(v);
        chol.solve(&xv).as_slice().to_vec()
    };
    let m_apply = |v: &[f64]| (y * DVector::from_column_slice(v)).as_slice().to_vec();
    let out = lanczos_extreme(n, apply, m_apply, Extreme::Magnitude, tol, 400)?;
    if !out.converged {
        return Err(Error::Numerical(format!(
            "Lanczos did not converge in {} steps (residual {:e})",
            out.iterations, out.residual
        )));
    }
    Ok(out.value.abs())
}

#[derive(Clone, Debug)]
pub struct KrylovOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// MINRES for symmetric (possibly indefinite) systems `A x = b`.
pub fn minres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> KrylovOutcome {
    let n = b.len();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return KrylovOutcome { x, iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut v_old = vec![0.0; n];
    let mut v: Vec<f64> = b.iter().map(|t| t / bnorm).collect();
    let mut beta = bnorm;
    let (mut c_old, mut s_old, mut c, mut s) = (1.0, 0.0, 1.0, 0.0);
    let mut w_old = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut eta = bnorm;
    let mut resid = bnorm;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let av = apply(&v);
        let alpha: f64 = av.iter().zip(&v).map(|(a, b)| a * b).sum();
        let mut v_new: Vec<f64> = (0..n).map(|i| av[i] - alpha * v[i] - beta * v_old[i]).collect();
        let beta_new = v_new.iter().map(|t| t * t).sum::<f64>().sqrt();
        // Apply previous rotations to the new column.
        let delta = c * alpha - c_old * s * beta;
        let rho2 = s * alpha + c_old * c * beta;
        let rho3 = s_old * beta;
        let rho1 = (delta * delta + beta_new * beta_new).sqrt();
        if rho1 == 0.0 {
            break;
        }
        let c_new = delta / rho1;
        let s_new = beta_new / rho1;
        let w_new: Vec<f64> = (0..n).map(|i| (v[i] - rho3 * w_old[i] - rho2 * w[i]) / rho1).collect();
        for i in 0..n {
            x[i] += c_new * eta * w_new[i];
        }
        eta *= -s_new;
        resid = eta.abs();
        w_old = std::mem::replace(&mut w, w_new);
        c_old = c;
        s_old = s;
        c = c_new;
        s = s_new;
        beta = beta_new;
        if resid <= tol * bnorm || beta_new == 0.0 {
            break;
        }
        v_new.iter_mut().for_each(|t| *t /= beta_new);
        v_old = std::mem::replace(&mut v, v_new);
    }
    // Recompute the true residual.
    let ax = apply(&x);
    let true_res = ax.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / bnorm;
    let _ = resid;
    KrylovOutcome { x, iterations: it, relative_residual: true_res, converged: true_res <= tol * 10.0 }
}

/// Square solver with a dense LU path and a MINRES path for symmetric
/// systems above `dense_limit`.
pub enum SquareSolver {
    Dense(LU<f64, Dyn, Dyn>),
    Iterative { matrix: CsrMatrix, tol: f64 },
}

impl SquareSolver {
    pub fn new(matrix: &CsrMatrix, dense_limit: usize, tol: f64) -> Self {
        if matrix.nrows() <= dense_limit {
            SquareSolver::Dense(LU::new(matrix.to_dense()))
        } else {
            SquareSolver::Iterative { matrix: matrix.clone(), tol }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            SquareSolver::Dense(lu) => lu
                .solve(&DVector::from_column_slice(b))
                .map(|x| x.as_slice().to_vec())
                .ok_or_else(|| Error::Numerical("singular dense system".into())),
            SquareSolver::Iterative { matrix, tol } => {
                let out = minres(|x| matrix.matvec(x), b, *tol, 20 * matrix.nrows() + 100);
                if out.converged {
                    Ok(out.x)
                } else {
                    Err(Error::Numerical(format!(
                        "MINRES stalled at relative residual {:e}",
                        out.relative_residual
                    )))
                }
            }
        }
    }
}

/// Applies a real linear solve to a real or complex right-hand side, one
/// solve per part.
pub fn solve_parts<T: Value>(rhs: &[T], mut solve: impl FnMut(&[f64]) -> Result<Vec<f64>>) -> Result<Vec<T>> {
    let re: Vec<f64> = rhs.iter().map(|v| v.to_complex().re).collect();
    let x_re = solve(&re)?;
    if !T::IS_COMPLEX {
        return Ok(x_re.into_iter().map(|v| T::from_parts(v, 0.0)).collect());
    }
    let im: Vec<f64> = rhs.iter().map(|v| v.to_complex().im).collect();
    let x_im = solve(&im)?;
    Ok(x_re.into_iter().zip(x_im).map(|(a, b)| T::from_parts(a, b)).collect())
}

/// Smallest absolute eigenvalue of a symmetric matrix (dense).
pub fn smallest_abs_eigenvalue(a: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(a).iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize, shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 0.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn sparse_product_matches_dense() {
        let a = laplace_1d(6, 0.3);
        let b = CsrMatrix::from_triplets(6, 3, vec![(0, 0, 1.0), (2, 1, -2.0), (5, 2, 0.5), (3, 0, 4.0)]);
        let p = a.mul(&b).to_dense();
        let q = a.to_dense() * b.to_dense();
        assert!((p - q).abs().max() < 1e-14);
        let g = b.gram().to_dense();
        let gd = b.to_dense().transpose() * b.to_dense();
        assert!((g - gd).abs().max() < 1e-14);
    }

    #[test]
    fn lanczos_matches_dense_pencil() {
        let n = 60;
        let k = laplace_1d(n, 0.01).to_dense();
        let mut m = DMatrix::identity(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0 + (i % 7) as f64 * 0.1;
        }
        let dense = smallest_pencil_eigenvalue(&k, &m, 1000, 1e-10).unwrap();
        let lanczos = smallest_pencil_eigenvalue(&k, &m, 0, 1e-10).unwrap();
        assert!((dense - lanczos).abs() <= 1e-8 * dense.abs());
    }

    #[test]
    fn minres_solves_indefinite_system() {
        let n = 40;
        let a = laplace_1d(n, -1.3);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let out = minres(|x| a.matvec(x), &b, 1e-12, 500);
        assert!(out.converged, "residual {}", out.relative_residual);
        let lu = LU::new(a.to_dense()).solve(&DVector::from_vec(b)).unwrap();
        let err = out.x.iter().zip(lu.iter()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8);
    }
}
