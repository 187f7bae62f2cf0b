//! Conductivity weights on the dual grids, mesh-quality metrics, the
//! enclosing domain with its cutoff, and stencil assembly.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calculus;
use crate::error::{Error, Result};
use crate::lattice::{DirectionSet, Field, Lattice, PointSet, ScalarField};
use crate::linalg::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaMetrics {
    pub eps_d: f64,
    pub eps_a: f64,
    #[serde(rename = "M")]
    pub m_bound: f64,
}

/// Weights `σ^i` on the full dual grids `K^i`, one per direction.
#[derive(Clone, Debug)]
pub struct SigmaSet {
    lattice: Lattice,
    dirs: DirectionSet,
    fields: Vec<ScalarField>,
    metrics: SigmaMetrics,
}

impl SigmaSet {
    pub fn new(lattice: Lattice, dirs: DirectionSet, fields: Vec<ScalarField>) -> Result<Self> {
        if dirs.dim() != lattice.dim() {
            return Err(Error::InvalidDirections("dimension mismatch".into()));
        }
        if fields.len() != dirs.len() {
            return Err(Error::DomainMismatch(format!(
                "{} weight fields for {} directions",
                fields.len(),
                dirs.len()
            )));
        }
        let full = lattice.full();
        for (i, f) in fields.iter().enumerate() {
            let dual = full.dual(&dirs, i)?;
            if !f.domain().same_points(&dual) {
                return Err(Error::DomainMismatch(format!(
                    "weight {i} must live on the full dual grid"
                )));
            }
        }
        let metrics = compute_metrics(&lattice, &dirs, &fields)?;
        Ok(Self { lattice, dirs, fields, metrics })
    }

    /// Samples `f(i, y)` at every dual point `y` of `K^i`.
    pub fn from_fn(
        lattice: Lattice,
        dirs: DirectionSet,
        f: impl Fn(usize, &[f64]) -> f64,
    ) -> Result<Self> {
        let full = lattice.full();
        let mut fields = Vec::with_capacity(dirs.len());
        for i in 0..dirs.len() {
            let dual = Arc::new(full.dual(&dirs, i)?);
            fields.push(Field::from_fn(dual, |y| f(i, y)));
        }
        Self::new(lattice, dirs, fields)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.dirs
    }

    pub fn field(&self, i: usize) -> &ScalarField {
        &self.fields[i]
    }

    pub fn fields(&self) -> &[ScalarField] {
        &self.fields
    }

    /// `σ^i` at a dual point key.
    pub fn weight(&self, i: usize, key: u64) -> Option<f64> {
        self.fields.get(i).and_then(|f| f.get(key))
    }

    pub fn metrics(&self) -> SigmaMetrics {
        self.metrics
    }

    /// Canonical directions with every weight exactly 1.
    pub fn is_uniform(&self) -> bool {
        self.dirs.is_canonical() && self.fields.iter().all(|f| f.values().iter().all(|&v| v == 1.0))
    }

    /// `σ^i` at the two half-step neighbours of a primal point.
    pub(crate) fn weights_around(&self, i: usize, key: u64) -> Result<(f64, f64)> {
        let e = self.dirs.get(i)?;
        let missing = || Error::MissingSigma { direction: i, point: self.lattice.decode(key) };
        let plus = self
            .lattice
            .offset_key(key, e, 1)
            .and_then(|k| self.weight(i, k))
            .ok_or_else(missing)?;
        let minus = self
            .lattice
            .offset_key(key, e, -1)
            .and_then(|k| self.weight(i, k))
            .ok_or_else(missing)?;
        Ok((plus, minus))
    }
}

fn compute_metrics(lattice: &Lattice, dirs: &DirectionSet, fields: &[ScalarField]) -> Result<SigmaMetrics> {
    let mut eps_d = 0.0;
    for f in fields {
        for j in 0..dirs.len() {
            let dj = calculus::diff(f, dirs, j)?;
            eps_d += dj.max_abs();
        }
    }
    let d = lattice.dim();
    let interior = lattice.full().interior(dirs);
    let mut eps_a: f64 = 0.0;
    let mut mat = vec![0.0; d * d];
    for &key in interior.keys() {
        mat.iter_mut().for_each(|v| *v = 0.0);
        for (i, f) in fields.iter().enumerate() {
            let e = dirs.get(i)?;
            let plus = lattice.offset_key(key, e, 1).and_then(|k| f.get(k));
            let minus = lattice.offset_key(key, e, -1).and_then(|k| f.get(k));
            let (Some(p), Some(m)) = (plus, minus) else {
                return Err(Error::MissingSigma { direction: i, point: lattice.decode(key) });
            };
            let avg = 0.5 * (p + m);
            for r in 0..d {
                for c in 0..d {
                    mat[r * d + c] += avg * (e[r] * e[c]) as f64;
                }
            }
        }
        for r in 0..d {
            mat[r * d + r] -= 1.0;
        }
        eps_a = mat.iter().fold(eps_a, |m, v| m.max(v.abs()));
    }
    let m_bound = fields.iter().map(|f| f.max_abs()).sum();
    Ok(SigmaMetrics { eps_d, eps_a, m_bound })
}

pub fn sigma_metrics(sigma: &SigmaSet) -> SigmaMetrics {
    sigma.metrics()
}

/// `σ^i ≡ 1` along the canonical basis.
pub fn build_sigma_uniform(lattice: Lattice) -> SigmaSet {
    SigmaSet::from_fn(lattice, DirectionSet::canonical(lattice.dim()), |_, _| 1.0)
        .expect("canonical directions are valid")
}

/// Nine-point stencil: weight `a` on the axes, `b` on the two diagonals.
pub fn build_sigma_nine_point(lattice: Lattice, a: f64, b: f64) -> Result<SigmaSet> {
    if lattice.dim() != 2 {
        return Err(Error::Unsupported("the nine-point stencil is two-dimensional".into()));
    }
    SigmaSet::from_fn(lattice, DirectionSet::nine_point(), |i, _| if i < 2 { a } else { b })
}

/// Assembled P1 stiffness on the perturbed right-triangle mesh, scaled as a
/// Laplacian: `K(x,y) = -∫∇φ_x·∇φ_y / h²`.
#[derive(Clone, Debug)]
pub struct RigidityMatrix {
    pub nodes: PointSet,
    pub matrix: CsrMatrix,
}

type Point2 = [f64; 2];

fn ccw_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

/// `½ cot` of the angle at `o` in triangle `(o, p, q)`.
fn half_cot(o: Point2, p: Point2, q: Point2) -> f64 {
    let a = [p[0] - o[0], p[1] - o[1]];
    let b = [q[0] - o[0], q[1] - o[1]];
    let dot = a[0] * b[0] + a[1] * b[1];
    let cross = (a[0] * b[1] - a[1] * b[0]).abs();
    0.5 * dot / cross
}

struct PerturbedMesh<'a> {
    n: usize,
    g: &'a dyn Fn(&[f64]) -> [f64; 2],
}

impl PerturbedMesh<'_> {
    /// Image of node index `(i, j)` in index units (cotangents are scale
    /// invariant), defined for indices outside the grid too.
    fn node(&self, i: i64, j: i64) -> Point2 {
        let n = self.n as f64;
        let d = (self.g)(&[i as f64 / n, j as f64 / n]);
        [i as f64 + n * d[0], j as f64 + n * d[1]]
    }

    /// The two triangles of the cell with lower-left node `(i, j)`, as index triples.
    fn cell_triangles(i: i64, j: i64) -> [[(i64, i64); 3]; 2] {
        [
            [(i, j), (i + 1, j), (i + 1, j + 1)],
            [(i, j), (i + 1, j + 1), (i, j + 1)],
        ]
    }

    fn check(&self, tri: &[(i64, i64); 3]) -> Result<[Point2; 3]> {
        let p = tri.map(|(i, j)| self.node(i, j));
        let area = ccw_area(p[0], p[1], p[2]);
        if area <= 0.0 {
            return Err(Error::FlippedTriangle { node: vec![tri[0].0, tri[0].1], area });
        }
        Ok(p)
    }

    /// Edge weight `Σ_T ½ cot θ_opp` over the two triangles sharing the
    /// edge from node `p` along direction `dir`.
    fn edge_weight(&self, p: (i64, i64), dir: usize) -> Result<f64> {
        let (i, j) = p;
        // (triangle, index of the vertex opposite the edge)
        let tris: [([(i64, i64); 3], usize); 2] = match dir {
            0 => [(Self::cell_triangles(i, j)[0], 2), (Self::cell_triangles(i, j - 1)[1], 0)],
            1 => [(Self::cell_triangles(i, j)[1], 1), (Self::cell_triangles(i - 1, j)[0], 0)],
            _ => [(Self::cell_triangles(i, j)[0], 1), (Self::cell_triangles(i, j)[1], 2)],
        };
        let mut w = 0.0;
        for (tri, opp) in tris {
            let pts = self.check(&tri)?;
            let o = pts[opp];
            let others: Vec<Point2> = (0..3).filter(|&k| k != opp).map(|k| pts[k]).collect();
            w += half_cot(o, others[0], others[1]);
        }
        Ok(w)
    }
}

/// P1 elements on the uniformly refined triangulation of the nodes moved by
/// `x ↦ x + g(x)`. Edge weights on boundary edges use the mesh continued
/// past the grid with the same map.
pub fn build_sigma_p1(lattice: Lattice, g: &dyn Fn(&[f64]) -> [f64; 2]) -> Result<SigmaSet> {
    if lattice.dim() != 2 {
        return Err(Error::Unsupported("P1 weights are built on triangles only (d = 2)".into()));
    }
    let mesh = PerturbedMesh { n: lattice.n(), g };
    let dirs = DirectionSet::triangles();
    let full = lattice.full();
    let mut fields = Vec::with_capacity(3);
    for i in 0..3 {
        let dual = full.dual(&dirs, i)?;
        let e = dirs.get(i)?;
        let mut values = Vec::with_capacity(dual.len());
        for &key in dual.keys() {
            let c = lattice
                .offset_key(key, e, -1)
                .map(|k| lattice.decode(k))
                .expect("dual points have both endpoints");
            values.push(mesh.edge_weight((c[0] / 2, c[1] / 2), i)?);
        }
        fields.push(Field::new(dual, values)?);
    }
    SigmaSet::new(lattice, dirs, fields)
}

/// Direct P1 assembly over the triangles whose three vertices lie in the grid.
pub fn assemble_p1_rigidity(lattice: Lattice, g: &dyn Fn(&[f64]) -> [f64; 2]) -> Result<RigidityMatrix> {
    if lattice.dim() != 2 {
        return Err(Error::Unsupported("P1 assembly is two-dimensional".into()));
    }
    let mesh = PerturbedMesh { n: lattice.n(), g };
    let nodes = lattice.full();
    let n = lattice.n() as i64;
    let h2 = lattice.h() * lattice.h();
    let index = |i: i64, j: i64| nodes.index_of(&[2 * i, 2 * j]).expect("node in grid");
    let mut triplets = Vec::new();
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            for tri in PerturbedMesh::cell_triangles(i, j) {
                let pts = mesh.check(&tri)?;
                for opp in 0..3 {
                    let a = (opp + 1) % 3;
                    let b = (opp + 2) % 3;
                    let w = half_cot(pts[opp], pts[a], pts[b]) / h2;
                    let ia = index(tri[a].0, tri[a].1);
                    let ib = index(tri[b].0, tri[b].1);
                    triplets.push((ia, ib, w));
                    triplets.push((ib, ia, w));
                    triplets.push((ia, ia, -w));
                    triplets.push((ib, ib, -w));
                }
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(nodes.len(), nodes.len(), triplets);
    Ok(RigidityMatrix { nodes, matrix })
}

/// Stencil operator restricted to `rows` and `cols`; columns outside `cols`
/// are dropped, i.e. the input is a function of `cols` extended by zero.
/// `coeff(i, σ(x + e_i/2), σ(x - e_i/2))` returns the weights of
/// `(u(x + h e_i), u(x), u(x - h e_i))` contributed by direction `i`.
pub fn assemble_stencil(
    sigma: &SigmaSet,
    rows: &PointSet,
    cols: &PointSet,
    coeff: impl Fn(usize, f64, f64) -> (f64, f64, f64),
) -> Result<CsrMatrix> {
    let lattice = sigma.lattice();
    let dirs = sigma.directions();
    let mut triplets = Vec::new();
    for (r, &key) in rows.keys().iter().enumerate() {
        for i in 0..dirs.len() {
            let e = dirs.get(i)?;
            let (sp, sm) = sigma.weights_around(i, key)?;
            let (cp, cc, cm) = coeff(i, sp, sm);
            let targets = [
                (lattice.offset_key(key, e, 2), cp),
                (Some(key), cc),
                (lattice.offset_key(key, e, -2), cm),
            ];
            for (k, w) in targets {
                if let Some(c) = k.and_then(|k| cols.index_of_key(k)) {
                    triplets.push((r, c, w));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(rows.len(), cols.len(), triplets))
}

/// `Δ_h = Σ d_i(σ^i d_i ·)` as a matrix from functions on `cols` (zero
/// outside) to values on `rows`.
pub fn laplacian_matrix(sigma: &SigmaSet, rows: &PointSet, cols: &PointSet) -> Result<CsrMatrix> {
    let h2 = sigma.lattice().h().powi(2);
    assemble_stencil(sigma, rows, cols, |_, sp, sm| (sp / h2, -(sp + sm) / h2, sm / h2))
}

/// Assembled Laplacian of a domain: rows on `Å`, columns on `A`.
#[derive(Clone, Debug)]
pub struct LaplacianOperator {
    pub rows: PointSet,
    pub cols: PointSet,
    pub matrix: CsrMatrix,
}

pub fn assemble_laplacian(sigma: &SigmaSet, domain: &PointSet) -> Result<LaplacianOperator> {
    let rows = domain.interior(sigma.directions());
    let matrix = laplacian_matrix(sigma, &rows, domain)?;
    Ok(LaplacianOperator { rows, cols: domain.clone(), matrix })
}

/// Region whose nodes form `W`.
#[derive(Clone)]
pub enum Region {
    /// Axis-aligned box `[lo, hi]` in physical coordinates.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Predicate(Arc<dyn Fn(&[f64]) -> bool + Send + Sync>),
}

impl std::fmt::Debug for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Region::Box { lo, hi } => f.debug_struct("Box").field("lo", lo).field("hi", hi).finish(),
            Region::Predicate(_) => f.write_str("Predicate"),
        }
    }
}

impl Region {
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Region::Box { lo: vec![lo; dim], hi: vec![hi; dim] }
    }

    fn contains(&self, x: &[f64]) -> bool {
        const TOL: f64 = 1e-12;
        match self {
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(&v, (&l, &u))| v >= l - TOL && v <= u + TOL),
            Region::Predicate(p) => p(x),
        }
    }
}

/// Computational domain `W`, enclosure `B` and cutoff `ψ`.
#[derive(Clone, Debug)]
pub struct Domain {
    pub w: PointSet,
    pub b: PointSet,
    pub psi: ScalarField,
    pub m0: f64,
}

impl Domain {
    /// Checks `W ⊂ B̊ ⊂ B ⊂ K̈` for the given directions.
    pub fn from_sets(w: PointSet, b: PointSet, sigma: &SigmaSet) -> Result<Self> {
        let dirs = sigma.directions();
        let kdd = w.lattice().full().interior(dirs).interior(dirs);
        if !b.is_subset_of(&kdd) {
            return Err(Error::NotInterior("B must lie in the double interior of K".into()));
        }
        let b_int = b.interior(dirs);
        if !w.is_subset_of(&b_int) {
            return Err(Error::NotInterior("W must lie in the interior of B".into()));
        }
        let full = w.lattice().full();
        let values = full.keys().iter().map(|&k| if w.contains_key(k) { 1.0 } else { 0.0 }).collect();
        let psi = Field::new(full, values)?;
        let m0 = cutoff_bound(&psi, sigma)?;
        Ok(Self { w, b, psi, m0 })
    }

    pub fn w_interior(&self, dirs: &DirectionSet) -> PointSet {
        self.w.interior(dirs)
    }

    pub fn w_boundary(&self, dirs: &DirectionSet) -> PointSet {
        self.w.boundary(dirs)
    }

    pub fn b_interior(&self, dirs: &DirectionSet) -> PointSet {
        self.b.interior(dirs)
    }
}

fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

fn cutoff_bound(psi: &ScalarField, sigma: &SigmaSet) -> Result<f64> {
    let dirs = sigma.directions();
    let mut m0: f64 = 0.0;
    for i in 0..dirs.len() {
        m0 = m0.max(calculus::diff(psi, dirs, i)?.max_abs());
    }
    m0 = m0.max(calculus::laplacian(psi, sigma)?.max_abs());
    Ok(m0)
}

pub fn build_domain_and_cutoff(
    lattice: Lattice,
    sigma: &SigmaSet,
    region: &Region,
    margin: usize,
) -> Result<Domain> {
    if margin == 0 {
        return Err(Error::NotInterior("margin must be at least one node".into()));
    }
    let dirs = sigma.directions();
    let full = lattice.full();
    let w_keys: Vec<u64> = full
        .keys()
        .iter()
        .copied()
        .filter(|&k| region.contains(&lattice.position(k)))
        .collect();
    let w = PointSet::from_keys(lattice, Vec::new(), w_keys);
    if w.is_empty() {
        return Err(Error::NotInterior("region contains no nodes".into()));
    }
    let kdd = full.interior(dirs).interior(dirs);
    if !w.is_subset_of(&kdd) {
        return Err(Error::NotInterior("W too close to the boundary of K".into()));
    }
    // Graph distance to W over the stencil connections.
    let mut dist = vec![usize::MAX; full.len()];
    let mut queue = VecDeque::new();
    for &k in w.keys() {
        let idx = full.index_of_key(k).unwrap();
        dist[idx] = 0;
        queue.push_back(idx);
    }
    while let Some(idx) = queue.pop_front() {
        if dist[idx] >= margin {
            continue;
        }
        let key = full.key(idx);
        for e in dirs.iter() {
            for sign in [2, -2] {
                if let Some(nb) = lattice.offset_key(key, e, sign).and_then(|k| full.index_of_key(k)) {
                    if dist[nb] == usize::MAX {
                        dist[nb] = dist[idx] + 1;
                        queue.push_back(nb);
                    }
                }
            }
        }
    }
    let b_keys: Vec<u64> = (0..full.len())
        .filter(|&i| dist[i] <= margin)
        .map(|i| full.key(i))
        .filter(|&k| kdd.contains_key(k))
        .collect();
    let b = PointSet::from_keys(lattice, Vec::new(), b_keys);
    let b_int = b.interior(dirs);
    if !w.is_subset_of(&b_int) {
        return Err(Error::NotInterior("W too close to the boundary of K for this margin".into()));
    }
    // Euclidean distance to Ω (box) or to the nodes of W (predicate).
    let w_pos: Vec<Vec<f64>> = (0..w.len()).map(|i| w.position(i)).collect();
    let distance = |x: &[f64]| -> f64 {
        match region {
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&v, (&l, &u))| {
                    let d = (l - v).max(v - u).max(0.0);
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            Region::Predicate(_) => w_pos
                .iter()
                .map(|p| p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                .sqrt(),
        }
    };
    // Ramp width: the largest radius that keeps the support inside B̊.
    let width = full
        .keys()
        .iter()
        .filter(|&&k| !b_int.contains_key(k))
        .map(|&k| distance(&lattice.position(k)))
        .fold(f64::INFINITY, f64::min);
    let psi = Field::from_fn(Arc::new(full), |x| {
        if width <= 0.0 {
            return 0.0;
        }
        let t = distance(x) / width;
        1.0 - smoothstep5(t)
    });
    let mut psi = psi;
    // Nodes of W are exactly 1 even for predicate regions.
    let keys: Vec<u64> = psi.domain().keys().to_vec();
    for (idx, k) in keys.iter().enumerate() {
        if w.contains_key(*k) {
            psi.values_mut()[idx] = 1.0;
        }
    }
    let m0 = cutoff_bound(&psi, sigma)?;
    Ok(Domain { w, b, psi, m0 })
}
