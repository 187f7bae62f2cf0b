//! Forward Dirichlet solves, the discrete Dirichlet-to-Neumann map, boundary
//! Sobolev norms and the operator distance between two maps.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, LU};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calculus::normal_derivative_matrix;
use crate::error::{Error, Result};
use crate::lattice::{Field, PointSet, ScalarField, Value};
use crate::linalg::{self, minres, solve_parts, CsrMatrix};
use crate::sigma::{laplacian_matrix, SigmaSet};

/// Interior dimension up to which dense factorizations are used.
pub const DENSE_LIMIT: usize = 4000;
/// Relative threshold on the smallest eigenvalue of the interior operator
/// below which unique continuation is considered violated.
pub const KERNEL_TOL: f64 = 1e-9;

/// `Δ_h + q` with rows on `W̊` and columns on `W`, `q` acting on the diagonal.
pub fn interior_operator(w: &PointSet, q: Option<&ScalarField>, sigma: &SigmaSet) -> Result<CsrMatrix> {
    let dirs = sigma.directions();
    let rows = w.interior(dirs);
    let lap = laplacian_matrix(sigma, &rows, w)?;
    let Some(q) = q else { return Ok(lap) };
    if !q.domain().same_points(&rows) {
        return Err(Error::DomainMismatch("potential must live on the interior of W".into()));
    }
    let diag: Vec<(usize, usize, f64)> = rows
        .keys()
        .iter()
        .zip(q.values())
        .map(|(&k, &v)| (rows.index_of_key(k).unwrap(), w.index_of_key(k).unwrap(), v))
        .collect();
    Ok(lap.add_scaled(&CsrMatrix::from_triplets(rows.len(), w.len(), diag), 1.0))
}

fn column_indices(sub: &PointSet, of: &PointSet) -> Vec<usize> {
    sub.keys().iter().map(|&k| of.index_of_key(k).expect("subset")).collect()
}

/// Potential `q` on `W̊` with its sup bound, checked against unique
/// continuation for a given weight set.
#[derive(Clone, Debug)]
pub struct Potential {
    w: PointSet,
    q: ScalarField,
    m: f64,
    kernel_margin: f64,
}

impl Potential {
    /// Validates `‖q‖_∞ ≤ m` and that `Δ_h + q` on `W̊` with zero Dirichlet
    /// data has a trivial kernel.
    pub fn new(w: PointSet, q: ScalarField, m: f64, sigma: &SigmaSet) -> Result<Self> {
        if !(m >= 0.0) {
            return Err(Error::OutOfRange(format!("potential bound must be nonnegative, got {m}")));
        }
        let sup = q.max_abs();
        if sup > m * (1.0 + 1e-12) {
            return Err(Error::OutOfRange(format!("‖q‖∞ = {sup} exceeds the bound m = {m}")));
        }
        let op = interior_operator(&w, Some(&q), sigma)?;
        let interior = w.interior(sigma.directions());
        if interior.is_empty() {
            return Err(Error::DomainMismatch("W has an empty interior".into()));
        }
        let idx = column_indices(&interior, &w);
        let block = op.submatrix(&(0..interior.len()).collect::<Vec<_>>(), &idx);
        let scale = block.max_abs().max(1.0);
        let smallest = smallest_abs_eigenvalue_sparse(&block)?;
        let kernel_margin = smallest / scale;
        if kernel_margin <= KERNEL_TOL {
            return Err(Error::SingularInterior { sigma_min: smallest });
        }
        Ok(Self { w, q, m, kernel_margin })
    }

    /// `q ≡ 0` on `W̊`.
    pub fn zero(w: PointSet, sigma: &SigmaSet) -> Result<Self> {
        let q = ScalarField::zeros(w.interior(sigma.directions()));
        Self::new(w, q, 0.0, sigma)
    }

    pub fn w(&self) -> &PointSet {
        &self.w
    }

    pub fn q(&self) -> &ScalarField {
        &self.q
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// Smallest absolute eigenvalue of the interior block relative to its
    /// largest entry.
    pub fn kernel_margin(&self) -> f64 {
        self.kernel_margin
    }

    /// `q` extended by zero to `W`.
    pub fn on_w(&self) -> ScalarField {
        self.q.extend_to(self.w.clone()).expect("W̊ ⊂ W")
    }

    /// SHA-256 over the lattice shape, the node keys and the value bits.
    pub fn hash(&self) -> String {
        field_hash(&self.q)
    }
}

pub fn field_hash(f: &ScalarField) -> String {
    let mut hasher = Sha256::new();
    hasher.update((f.lattice().dim() as u64).to_le_bytes());
    hasher.update((f.lattice().n() as u64).to_le_bytes());
    for (&k, &v) in f.domain().keys().iter().zip(f.values()) {
        hasher.update(k.to_le_bytes());
        hasher.update(v.to_bits().to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

fn smallest_abs_eigenvalue_sparse(a: &CsrMatrix) -> Result<f64> {
    let n = a.nrows();
    if n <= DENSE_LIMIT {
        return Ok(linalg::smallest_abs_eigenvalue(&a.to_dense()));
    }
    // inverse iteration through MINRES; a stalled solve means near-singular
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut est = f64::INFINITY;
    for _ in 0..30 {
        let out = minres(|x| a.matvec(x), &v, 1e-12, 20 * n + 100);
        if !out.converged {
            return Ok(0.0);
        }
        let norm = out.x.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Ok(0.0);
        }
        let next = 1.0 / norm;
        v = out.x.iter().map(|t| t / norm).collect();
        if (next - est).abs() <= 1e-10 * next {
            return Ok(next);
        }
        est = next;
    }
    Ok(est)
}

enum Factor {
    Dense(LU<f64, Dyn, Dyn>),
    Iterative(CsrMatrix),
}

/// Factorized interior system of `Δ_h u + q u = 0` on `W̊`, `u = g` on `∂W`.
pub struct DirichletSolver {
    w: PointSet,
    interior: PointSet,
    boundary: PointSet,
    op: CsrMatrix,
    interior_cols: Vec<usize>,
    boundary_cols: Vec<usize>,
    coupling: CsrMatrix,
    factor: Factor,
}

impl DirichletSolver {
    pub fn new(q: &Potential, sigma: &SigmaSet) -> Result<Self> {
        let w = q.w().clone();
        let dirs = sigma.directions();
        let interior = w.interior(dirs);
        let boundary = w.boundary(dirs);
        let op = interior_operator(&w, Some(q.q()), sigma)?;
        let rows: Vec<usize> = (0..interior.len()).collect();
        let interior_cols = column_indices(&interior, &w);
        let boundary_cols = column_indices(&boundary, &w);
        let block = op.submatrix(&rows, &interior_cols);
        let coupling = op.submatrix(&rows, &boundary_cols);
        let factor = if interior.len() <= DENSE_LIMIT {
            Factor::Dense(LU::new(block.to_dense()))
        } else {
            Factor::Iterative(block)
        };
        Ok(Self { w, interior, boundary, op, interior_cols, boundary_cols, coupling, factor })
    }

    pub fn w(&self) -> &PointSet {
        &self.w
    }

    pub fn boundary(&self) -> &PointSet {
        &self.boundary
    }

    fn solve_interior(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match &self.factor {
            Factor::Dense(lu) => lu
                .solve(&DVector::from_column_slice(rhs))
                .map(|x| x.as_slice().to_vec())
                .ok_or_else(|| Error::SingularInterior { sigma_min: 0.0 }),
            Factor::Iterative(block) => {
                let out = minres(|x| block.matvec(x), rhs, 1e-12, 20 * block.nrows() + 100);
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

    /// Solution on `W` and the relative interior residual
    /// `‖(Δ_h + q)u‖ / ‖g‖`.
    pub fn solve_with_residual<T: Value>(&self, g: &Field<T>) -> Result<(Field<T>, f64)> {
        if !g.domain().same_points(&self.boundary) {
            return Err(Error::DomainMismatch("Dirichlet data must live on ∂W".into()));
        }
        let rhs: Vec<T> = crate::conjugate::apply_matrix(&self.coupling, g.values())
            .into_iter()
            .map(|v| -v)
            .collect();
        let x = solve_parts(&rhs, |b| self.solve_interior(b))?;
        let mut values = vec![T::zero(); self.w.len()];
        for (&c, &v) in self.interior_cols.iter().zip(&x) {
            values[c] = v;
        }
        for (&c, &v) in self.boundary_cols.iter().zip(g.values()) {
            values[c] = v;
        }
        let res = crate::conjugate::apply_matrix(&self.op, &values);
        let res_norm = res.iter().map(|v| v.abs_sq()).sum::<f64>().sqrt();
        let g_norm = g.values().iter().map(|v| v.abs_sq()).sum::<f64>().sqrt();
        let scale = self.op.max_abs() * g_norm;
        let rel = if scale > 0.0 { res_norm / scale } else { res_norm };
        Ok((Field::new(self.w.clone(), values)?, rel))
    }

    pub fn solve<T: Value>(&self, g: &Field<T>) -> Result<Field<T>> {
        self.solve_with_residual(g).map(|(u, _)| u)
    }

    pub fn interior(&self) -> &PointSet {
        &self.interior
    }
}

/// Solves `Δ_h u + q u = 0` on `W̊` with `u = g` on `∂W`.
pub fn forward_solve<T: Value>(q: &Potential, g: &Field<T>, sigma: &SigmaSet) -> Result<Field<T>> {
    DirichletSolver::new(q, sigma)?.solve(g)
}

/// Dense `|∂W|×|∂W|` matrix of `g ↦ ∂_{n,h} u`.
#[derive(Clone, Debug)]
pub struct DtnOperator {
    pub boundary_nodes: PointSet,
    pub w: PointSet,
    pub matrix: DMatrix<f64>,
    pub q_hash: String,
    /// Largest relative interior residual over the column solves.
    pub max_residual: f64,
}

impl DtnOperator {
    pub fn apply<T: Value>(&self, g: &Field<T>) -> Result<Field<T>> {
        if !g.domain().same_points(&self.boundary_nodes) {
            return Err(Error::DomainMismatch("data must live on the DtN boundary".into()));
        }
        let n = self.boundary_nodes.len();
        let mut out = vec![T::zero(); n];
        for (r, o) in out.iter_mut().enumerate() {
            for (c, &v) in g.values().iter().enumerate() {
                *o += v * self.matrix[(r, c)];
            }
        }
        Field::new(self.boundary_nodes.clone(), out)
    }

    /// `(1/h) ∫_{∂W} Λ(u) v`.
    pub fn pairing<T: Value>(&self, u: &Field<T>, v: &Field<T>) -> Result<T> {
        let lu = self.apply(u)?;
        Ok(crate::calculus::boundary_integral(&lu.mul(v)?))
    }

    /// `max |M_{ij} - M_{ji}|` relative to `max |M_{ij}|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.matrix.amax().max(f64::MIN_POSITIVE);
        (&self.matrix - self.matrix.transpose()).amax() / scale
    }
}

/// `Λ_h[q]`, column `j` being the normal derivative of the solve with the
/// `j`-th boundary indicator as data. Columns are solved concurrently and
/// stored in boundary order.
pub fn dtn_map(q: &Potential, sigma: &SigmaSet) -> Result<DtnOperator> {
    let solver = DirichletSolver::new(q, sigma)?;
    let dn = normal_derivative_matrix(q.w(), sigma)?;
    let boundary = solver.boundary().clone();
    let nb = boundary.len();
    let columns: Vec<Result<(Vec<f64>, f64)>> = (0..nb)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; nb];
            e[j] = 1.0;
            let g = Field::new(boundary.clone(), e)?;
            let (u, res) = solver.solve_with_residual(&g)?;
            Ok((dn.matvec(u.values()), res))
        })
        .collect();
    let mut matrix = DMatrix::zeros(nb, nb);
    let mut max_residual: f64 = 0.0;
    for (j, col) in columns.into_iter().enumerate() {
        let (col, res) = col?;
        max_residual = max_residual.max(res);
        for (i, v) in col.into_iter().enumerate() {
            matrix[(i, j)] = v;
        }
    }
    Ok(DtnOperator { boundary_nodes: boundary, w: q.w().clone(), matrix, q_hash: q.hash(), max_residual })
}

/// Surrogate value with the interval the sum-norm lies in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracketed {
    pub surrogate: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryNorms {
    pub h_half: Bracketed,
    pub h_minus_half: Bracketed,
}

/// Boundary Gram matrix: the Schur complement on `∂W` of the quadratic form
/// `‖u‖²_{L²(W)} + ‖u‖²_{Ḣ¹(W)} = h^d uᵀ E u`.
#[derive(Clone, Debug)]
pub struct BoundaryGram {
    w: PointSet,
    boundary: PointSet,
    schur: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

/// `E = I + L` on `W` where `h^d uᵀ L u = ‖u‖²_{Ḣ¹(W)}`.
pub fn energy_matrix(w: &PointSet, sigma: &SigmaSet) -> Result<DMatrix<f64>> {
    let dirs = sigma.directions();
    let lattice = *w.lattice();
    let inv_h2 = 1.0 / (lattice.h() * lattice.h());
    let n = w.len();
    let mut e = DMatrix::identity(n, n);
    for i in 0..dirs.len() {
        let dir = dirs.get(i)?;
        let dual = w.dual(dirs, i)?;
        for &y in dual.keys() {
            let s = sigma
                .weight(i, y)
                .ok_or_else(|| Error::MissingSigma { direction: i, point: lattice.decode(y) })?;
            if s < 0.0 {
                return Err(Error::NegativeSigma { direction: i, value: s });
            }
            let a = w.index_of_key(lattice.offset_key(y, dir, 1).unwrap()).unwrap();
            let b = w.index_of_key(lattice.offset_key(y, dir, -1).unwrap()).unwrap();
            let c = s * inv_h2;
            e[(a, a)] += c;
            e[(b, b)] += c;
            e[(a, b)] -= c;
            e[(b, a)] -= c;
        }
    }
    Ok(e)
}

impl BoundaryGram {
    pub fn new(w: &PointSet, sigma: &SigmaSet) -> Result<Self> {
        let dirs = sigma.directions();
        let interior = w.interior(dirs);
        let boundary = w.boundary(dirs);
        let e = energy_matrix(w, sigma)?;
        let bi = column_indices(&boundary, w);
        let ii = column_indices(&interior, w);
        let ebb = e.select_rows(&bi).select_columns(&bi);
        let schur = if ii.is_empty() {
            ebb
        } else {
            let eii = e.select_rows(&ii).select_columns(&ii);
            let eib = e.select_rows(&ii).select_columns(&bi);
            let chol = Cholesky::new(eii)
                .ok_or_else(|| Error::Numerical("energy form is not positive definite".into()))?;
            let x = chol.solve(&eib);
            ebb - eib.transpose() * x
        };
        let schur = (&schur + schur.transpose()) * 0.5;
        let chol = Cholesky::new(schur.clone())
            .ok_or_else(|| Error::Numerical("boundary Gram matrix is not positive definite".into()))?;
        Ok(Self { w: w.clone(), boundary, schur, chol })
    }

    pub fn boundary(&self) -> &PointSet {
        &self.boundary
    }

    pub fn schur(&self) -> &DMatrix<f64> {
        &self.schur
    }

    fn dim_h(&self) -> (i32, f64) {
        let l = self.w.lattice();
        (l.dim() as i32, l.h())
    }

    fn quad(&self, g: &[f64], inverse: bool) -> f64 {
        let v = DVector::from_column_slice(g);
        if inverse {
            v.dot(&self.chol.solve(&v))
        } else {
            v.dot(&(&self.schur * &v))
        }
    }

    fn quad_parts<T: Value>(&self, g: &Field<T>, inverse: bool) -> Result<f64> {
        if !g.domain().same_points(&self.boundary) {
            return Err(Error::DomainMismatch("trace must live on ∂W".into()));
        }
        let re: Vec<f64> = g.values().iter().map(|v| v.to_complex().re).collect();
        let im: Vec<f64> = g.values().iter().map(|v| v.to_complex().im).collect();
        Ok(self.quad(&re, inverse) + if T::IS_COMPLEX { self.quad(&im, inverse) } else { 0.0 })
    }

    /// Surrogate `H^{1/2}`: `min_{u|∂W = g} (‖u‖²_{L²} + ‖u‖²_{Ḣ¹})^{1/2}`.
    pub fn h_half<T: Value>(&self, g: &Field<T>) -> Result<f64> {
        let (d, h) = self.dim_h();
        Ok((h.powi(d) * self.quad_parts(g, false)?).max(0.0).sqrt())
    }

    /// Dual of the surrogate `H^{1/2}` under `(1/h) ∫_{∂W}`.
    pub fn h_minus_half<T: Value>(&self, g: &Field<T>) -> Result<f64> {
        let (d, h) = self.dim_h();
        let scale = h.powf(f64::from(d) - 1.0 - f64::from(d) / 2.0);
        Ok(scale * self.quad_parts(g, true)?.max(0.0).sqrt())
    }

    /// Extension of `g` realizing the surrogate `H^{1/2}` minimum.
    pub fn minimizing_extension(&self, g: &ScalarField, sigma: &SigmaSet) -> Result<ScalarField> {
        let dirs = sigma.directions();
        let interior = self.w.interior(dirs);
        let e = energy_matrix(&self.w, sigma)?;
        let bi = column_indices(&self.boundary, &self.w);
        let ii = column_indices(&interior, &self.w);
        let mut values = vec![0.0; self.w.len()];
        for (&c, &v) in bi.iter().zip(g.values()) {
            values[c] = v;
        }
        if !ii.is_empty() {
            let eii = e.select_rows(&ii).select_columns(&ii);
            let eib = e.select_rows(&ii).select_columns(&bi);
            let rhs = -(eib * DVector::from_column_slice(g.values()));
            let x = Cholesky::new(eii)
                .ok_or_else(|| Error::Numerical("energy form is not positive definite".into()))?
                .solve(&rhs);
            for (&c, &v) in ii.iter().zip(x.iter()) {
                values[c] = v;
            }
        }
        Field::new(self.w.clone(), values)
    }

    /// Maximizer of the duality pairing for `g`: `S^{-1} g`.
    pub fn dual_maximizer(&self, g: &ScalarField) -> Result<ScalarField> {
        let x = self.chol.solve(&DVector::from_column_slice(g.values()));
        Field::new(self.boundary.clone(), x.as_slice().to_vec())
    }
}

/// Surrogate `H^{±1/2}(∂W)` norms with their sum-norm brackets.
pub fn boundary_norms<T: Value>(g: &Field<T>, w: &PointSet, sigma: &SigmaSet) -> Result<BoundaryNorms> {
    let gram = BoundaryGram::new(w, sigma)?;
    norms_with(&gram, g)
}

pub fn norms_with<T: Value>(gram: &BoundaryGram, g: &Field<T>) -> Result<BoundaryNorms> {
    let hp = gram.h_half(g)?;
    let hm = gram.h_minus_half(g)?;
    let r2 = std::f64::consts::SQRT_2;
    Ok(BoundaryNorms {
        h_half: Bracketed { surrogate: hp, lower: hp, upper: r2 * hp },
        h_minus_half: Bracketed { surrogate: hm, lower: hm / r2, upper: hm },
    })
}

/// Operator norm of `Λ₁ - Λ₂` from `H^{1/2}(∂W)` to `H^{-1/2}(∂W)`.
pub fn dtn_distance(l1: &DtnOperator, l2: &DtnOperator, sigma: &SigmaSet) -> Result<Bracketed> {
    if !l1.boundary_nodes.same_points(&l2.boundary_nodes) || !l1.w.same_points(&l2.w) {
        return Err(Error::DomainMismatch("DtN maps live on different boundaries".into()));
    }
    let gram = BoundaryGram::new(&l1.w, sigma)?;
    distance_with(&gram, l1, l2)
}

pub fn distance_with(gram: &BoundaryGram, l1: &DtnOperator, l2: &DtnOperator) -> Result<Bracketed> {
    if !l1.boundary_nodes.same_points(gram.boundary()) || !l2.boundary_nodes.same_points(gram.boundary()) {
        return Err(Error::DomainMismatch("DtN maps live on different boundaries".into()));
    }
    let d = &l1.matrix - &l2.matrix;
    if d.amax() == 0.0 {
        return Ok(Bracketed { surrogate: 0.0, lower: 0.0, upper: 0.0 });
    }
    // sup_g ‖Dg‖²_{S⁻¹}/‖g‖²_S = ‖L⁻¹ D L⁻ᵀ‖₂² with S = L Lᵀ
    let l = gram.chol.l();
    let y = l
        .solve_lower_triangular(&d)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let top = SymmetricEigen::new(c).eigenvalues.amax();
    let h = gram.w.lattice().h();
    let value = top / h;
    Ok(Bracketed { surrogate: value, lower: value / 2.0, upper: value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::sigma::build_sigma_uniform;

    #[test]
    fn constant_data_gives_constant_solution() {
        let l = Lattice::new(2, 8).unwrap();
        let sigma = build_sigma_uniform(l);
        let w = PointSet::index_box(l, &[1, 1], &[6, 5]).unwrap();
        let q = Potential::zero(w.clone(), &sigma).unwrap();
        let g = ScalarField::constant(w.boundary(sigma.directions()), 2.5);
        let u = forward_solve(&q, &g, &sigma).unwrap();
        assert!(u.values().iter().all(|&v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn dirichlet_eigenvalue_is_rejected() {
        let l = Lattice::new(1, 8).unwrap();
        let sigma = build_sigma_uniform(l);
        let w = l.full();
        let h = l.h();
        // W has 7 intervals
        let lam = 4.0 / (h * h) * (std::f64::consts::PI / 14.0).sin().powi(2);
        let q = ScalarField::constant(w.interior(sigma.directions()), lam);
        assert!(matches!(
            Potential::new(w, q, lam, &sigma),
            Err(Error::SingularInterior { .. })
        ));
    }

    #[test]
    fn dtn_of_zero_potential_kills_constants() {
        let l = Lattice::new(2, 7).unwrap();
        let sigma = build_sigma_uniform(l);
        let w = PointSet::index_box(l, &[1, 1], &[5, 5]).unwrap();
        let q = Potential::zero(w, &sigma).unwrap();
        let dtn = dtn_map(&q, &sigma).unwrap();
        for r in 0..dtn.matrix.nrows() {
            assert!(dtn.matrix.row(r).sum().abs() < 1e-10);
        }
        assert!(dtn.asymmetry() < 1e-12);
    }
}
