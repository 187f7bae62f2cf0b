//! Regular grid of the unit cube, direction sets, shifted dual point sets,
//! discrete integrals and the lattice Fourier transform.
//!
//! Points are stored with doubled integer coordinates: the primal node
//! `k/N` has coordinate `2k`, and a half step `h e_i / 2` is the integer
//! vector `e_i`. Each point is packed into a `u64` key whose numeric order
//! matches lexicographic order of the coordinates.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigma::SigmaSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lattice {
    dim: usize,
    n: usize,
}

impl Lattice {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidLattice("dimension must be at least 1".into()));
        }
        if n < 3 {
            return Err(Error::InvalidLattice(format!(
                "N = {n} < 3 leaves no double interior"
            )));
        }
        let base = 2 * n as u64 - 1;
        if base.checked_pow(dim as u32).is_none() {
            return Err(Error::InvalidLattice(format!(
                "(2N-1)^d overflows the point key for d = {dim}, N = {n}"
            )));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// h^d, the weight of one point in every discrete integral.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn num_points(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Largest doubled coordinate, `2(N-1)`.
    pub fn max_coord(&self) -> i64 {
        2 * (self.n as i64 - 1)
    }

    fn base(&self) -> u64 {
        2 * self.n as u64 - 1
    }

    /// Packs doubled coordinates into a key; `None` if any coordinate leaves
    /// `[0, 2(N-1)]`.
    pub fn encode(&self, coords: &[i64]) -> Option<u64> {
        debug_assert_eq!(coords.len(), self.dim);
        let max = self.max_coord();
        let base = self.base();
        let mut key = 0u64;
        for &c in coords {
            if c < 0 || c > max {
                return None;
            }
            key = key * base + c as u64;
        }
        Some(key)
    }

    pub fn decode(&self, key: u64) -> Vec<i64> {
        let mut out = vec![0i64; self.dim];
        self.decode_into(key, &mut out);
        out
    }

    pub fn decode_into(&self, mut key: u64, out: &mut [i64]) {
        let base = self.base();
        for slot in out.iter_mut().rev() {
            *slot = (key % base) as i64;
            key /= base;
        }
    }

    /// Key of `key + sign * offset` in doubled coordinates, if it stays in range.
    pub fn offset_key(&self, key: u64, offset: &[i64], sign: i64) -> Option<u64> {
        let base = self.base();
        let max = self.max_coord();
        let mut rest = key;
        let mut place = 1u64;
        let mut out = 0u64;
        for axis in (0..self.dim).rev() {
            let c = (rest % base) as i64 + sign * offset[axis];
            rest /= base;
            if c < 0 || c > max {
                return None;
            }
            out += c as u64 * place;
            place *= base;
        }
        Some(out)
    }

    /// Physical position `doubled / (2N)` of a key.
    pub fn position(&self, key: u64) -> Vec<f64> {
        let scale = 0.5 / self.n as f64;
        self.decode(key).into_iter().map(|c| c as f64 * scale).collect()
    }

    pub fn full(&self) -> PointSet {
        let n = self.n as i64;
        let mut keys = Vec::with_capacity(self.num_points());
        let mut idx = vec![0i64; self.dim];
        let mut coords = vec![0i64; self.dim];
        loop {
            for (c, k) in coords.iter_mut().zip(&idx) {
                *c = 2 * k;
            }
            keys.push(self.encode(&coords).expect("in range"));
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    return PointSet::from_sorted_keys(*self, Vec::new(), keys);
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < n {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }

    /// Whether the double interior of the full grid is nonempty for `dirs`.
    pub fn has_double_interior(&self, dirs: &DirectionSet) -> bool {
        let k = self.full();
        !k.interior(dirs).interior(dirs).is_empty()
    }
}

/// Connection vectors `e_1..e_k` of the stencil.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionSet {
    dim: usize,
    dirs: Vec<Vec<i64>>,
}

impl DirectionSet {
    pub fn new(dim: usize, dirs: Vec<Vec<i64>>) -> Result<Self> {
        if dirs.is_empty() {
            return Err(Error::InvalidDirections("empty direction set".into()));
        }
        for (i, e) in dirs.iter().enumerate() {
            if e.len() != dim {
                return Err(Error::InvalidDirections(format!(
                    "direction {i} has length {}, expected {dim}",
                    e.len()
                )));
            }
            if e.iter().all(|&c| c == 0) {
                return Err(Error::InvalidDirections(format!("direction {i} is zero")));
            }
        }
        for i in 0..dirs.len() {
            for j in 0..dirs.len() {
                if i == j {
                    continue;
                }
                let opposite = dirs[i].iter().zip(&dirs[j]).all(|(a, b)| *a == -*b);
                let equal = dirs[i] == dirs[j];
                if opposite || equal {
                    return Err(Error::InvalidDirections(format!(
                        "directions {i} and {j} are parallel with equal length"
                    )));
                }
            }
        }
        if rank(&dirs, dim) < dim {
            return Err(Error::InvalidDirections("directions do not span R^d".into()));
        }
        Ok(Self { dim, dirs })
    }

    pub fn canonical(dim: usize) -> Self {
        let dirs = (0..dim)
            .map(|i| (0..dim).map(|j| i64::from(i == j)).collect())
            .collect();
        Self { dim, dirs }
    }

    /// (1,0), (0,1), (1,1), (1,-1).
    pub fn nine_point() -> Self {
        Self {
            dim: 2,
            dirs: vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![1, -1]],
        }
    }

    /// (1,0), (0,1), (1,1): the edges of the right-triangle mesh.
    pub fn triangles() -> Self {
        Self {
            dim: 2,
            dirs: vec![vec![1, 0], vec![0, 1], vec![1, 1]],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn get(&self, i: usize) -> Result<&[i64]> {
        self.dirs
            .get(i)
            .map(|v| v.as_slice())
            .ok_or(Error::DirectionOutOfRange { index: i, count: self.dirs.len() })
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i64]> {
        self.dirs.iter().map(|v| v.as_slice())
    }

    pub fn is_canonical(&self) -> bool {
        *self == Self::canonical(self.dim)
    }

    /// `e_i` as a real vector.
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.dirs[i].iter().map(|&c| c as f64).collect()
    }

    /// `v . e_i` for a real vector `v`.
    pub fn dot(&self, i: usize, v: &[f64]) -> f64 {
        self.dirs[i].iter().zip(v).map(|(&e, &x)| e as f64 * x).sum()
    }

    /// `v . e_i` for a complex vector `v`.
    pub fn dot_complex(&self, i: usize, v: &[Complex64]) -> Complex64 {
        self.dirs[i].iter().zip(v).map(|(&e, &x)| x * e as f64).sum()
    }
}

fn rank(vectors: &[Vec<i64>], dim: usize) -> usize {
    let mut rows: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().map(|&c| c as f64).collect())
        .collect();
    let mut r = 0;
    for col in 0..dim {
        let pivot = (r..rows.len()).max_by(|&a, &b| {
            rows[a][col].abs().partial_cmp(&rows[b][col].abs()).unwrap()
        });
        let Some(p) = pivot else { break };
        if rows[p][col].abs() < 1e-12 {
            continue;
        }
        rows.swap(r, p);
        for i in 0..rows.len() {
            if i != r {
                let f = rows[i][col] / rows[r][col];
                for j in 0..dim {
                    rows[i][j] -= f * rows[r][j];
                }
            }
        }
        r += 1;
    }
    r
}

/// An ordered set of (possibly shifted) lattice points.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointSet {
    lattice: Lattice,
    shift: Vec<usize>,
    keys: Vec<u64>,
}

impl fmt::Debug for PointSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PointSet")
            .field("lattice", &self.lattice)
            .field("shift", &self.shift)
            .field("len", &self.keys.len())
            .finish()
    }
}

/// The sets attached to `A` by a direction set.
#[derive(Clone, Debug)]
pub struct DerivedSets {
    pub duals: Vec<PointSet>,
    pub interior: PointSet,
    pub boundary: PointSet,
    pub directional_boundaries: Vec<PointSet>,
    /// `normals[i][p]` is the exterior normal sign at the `p`-th point of
    /// `directional_boundaries[i]`.
    pub normals: Vec<Vec<i8>>,
}

impl PointSet {
    fn from_sorted_keys(lattice: Lattice, mut shift: Vec<usize>, keys: Vec<u64>) -> Self {
        shift.sort_unstable();
        debug_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        Self { lattice, shift, keys }
    }

    pub fn from_keys(lattice: Lattice, shift: Vec<usize>, mut keys: Vec<u64>) -> Self {
        keys.sort_unstable();
        keys.dedup();
        Self::from_sorted_keys(lattice, shift, keys)
    }

    pub fn empty(lattice: Lattice, shift: Vec<usize>) -> Self {
        Self::from_sorted_keys(lattice, shift, Vec::new())
    }

    /// Builds a set from doubled coordinates.
    pub fn from_coords<I, C>(lattice: Lattice, shift: Vec<usize>, coords: I) -> Result<Self>
    where
        I: IntoIterator<Item = C>,
        C: AsRef<[i64]>,
    {
        let mut keys = Vec::new();
        for c in coords {
            let c = c.as_ref();
            if c.len() != lattice.dim() {
                return Err(Error::DomainMismatch(format!(
                    "point {c:?} has wrong dimension"
                )));
            }
            let key = lattice
                .encode(c)
                .ok_or_else(|| Error::DomainMismatch(format!("point {c:?} outside [0,1]^d")))?;
            keys.push(key);
        }
        Ok(Self::from_keys(lattice, shift, keys))
    }

    /// Builds a primal set from node index tuples `k` (point `k/N`).
    pub fn from_indices<I, C>(lattice: Lattice, indices: I) -> Result<Self>
    where
        I: IntoIterator<Item = C>,
        C: AsRef<[i64]>,
    {
        let doubled: Vec<Vec<i64>> = indices
            .into_iter()
            .map(|k| k.as_ref().iter().map(|&c| 2 * c).collect())
            .collect();
        Self::from_coords(lattice, Vec::new(), doubled)
    }

    /// Primal nodes whose index tuple lies in the box `lo..=hi` on every axis.
    pub fn index_box(lattice: Lattice, lo: &[i64], hi: &[i64]) -> Result<Self> {
        let full = lattice.full();
        let keys = full
            .keys
            .iter()
            .copied()
            .filter(|&key| {
                let c = lattice.decode(key);
                c.iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(&c, (&l, &u))| c >= 2 * l && c <= 2 * u)
            })
            .collect();
        Ok(Self::from_sorted_keys(lattice, Vec::new(), keys))
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn shift(&self) -> &[usize] {
        &self.shift
    }

    /// Bit `i` is set when direction `i` occurs an odd number of times in the shift.
    pub fn shift_mask(&self) -> u32 {
        self.shift.iter().fold(0u32, |m, &i| m ^ (1u32 << (i % 32)))
    }

    pub fn is_primal(&self) -> bool {
        self.shift.is_empty()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[u64] {
        &self.keys
    }

    pub fn key(&self, idx: usize) -> u64 {
        self.keys[idx]
    }

    pub fn coords(&self, idx: usize) -> Vec<i64> {
        self.lattice.decode(self.keys[idx])
    }

    pub fn position(&self, idx: usize) -> Vec<f64> {
        self.lattice.position(self.keys[idx])
    }

    pub fn index_of_key(&self, key: u64) -> Option<usize> {
        self.keys.binary_search(&key).ok()
    }

    pub fn contains_key(&self, key: u64) -> bool {
        self.index_of_key(key).is_some()
    }

    pub fn index_of(&self, coords: &[i64]) -> Option<usize> {
        self.lattice.encode(coords).and_then(|k| self.index_of_key(k))
    }

    pub fn contains(&self, coords: &[i64]) -> bool {
        self.index_of(coords).is_some()
    }

    /// Whether `x + sign * h e` is in the set (`sign = ±1` is a full step).
    fn has_neighbor(&self, key: u64, e: &[i64], sign: i64) -> bool {
        self.lattice
            .offset_key(key, e, 2 * sign)
            .is_some_and(|k| self.contains_key(k))
    }

    /// `A^i`: points `y` with `y ± h e_i / 2` both in `A`.
    pub fn dual(&self, dirs: &DirectionSet, i: usize) -> Result<PointSet> {
        let e = dirs.get(i)?;
        self.check_dirs(dirs)?;
        let mut keys = Vec::new();
        for &key in &self.keys {
            // y = x + e/2 has both endpoints in A iff x and x + e are.
            if let Some(y) = self.lattice.offset_key(key, e, 1) {
                if let Some(nb) = self.lattice.offset_key(y, e, 1) {
                    if self.contains_key(nb) {
                        keys.push(y);
                    }
                }
            }
        }
        let mut shift = self.shift.clone();
        shift.push(i);
        Ok(PointSet::from_keys(self.lattice, shift, keys))
    }

    /// `A^{ii}`, the points of `A` whose two neighbours along `e_i` are in `A`.
    pub fn double_dual(&self, dirs: &DirectionSet, i: usize) -> Result<PointSet> {
        let e = dirs.get(i)?;
        self.check_dirs(dirs)?;
        let keys = self
            .keys
            .iter()
            .copied()
            .filter(|&k| self.has_neighbor(k, e, 1) && self.has_neighbor(k, e, -1))
            .collect();
        Ok(PointSet::from_sorted_keys(self.lattice, self.shift.clone(), keys))
    }

    /// `Å`, the intersection of all `A^{ii}`.
    pub fn interior(&self, dirs: &DirectionSet) -> PointSet {
        let keys = self
            .keys
            .iter()
            .copied()
            .filter(|&k| {
                dirs.iter()
                    .all(|e| self.has_neighbor(k, e, 1) && self.has_neighbor(k, e, -1))
            })
            .collect();
        PointSet::from_sorted_keys(self.lattice, self.shift.clone(), keys)
    }

    /// `∂A = A \ Å`.
    pub fn boundary(&self, dirs: &DirectionSet) -> PointSet {
        self.difference(&self.interior(dirs))
    }

    /// `∂^i A = A \ A^{ii}` with the exterior normal sign of every point.
    pub fn directional_boundary(
        &self,
        dirs: &DirectionSet,
        i: usize,
    ) -> Result<(PointSet, Vec<i8>)> {
        let e = dirs.get(i)?;
        self.check_dirs(dirs)?;
        let mut keys = Vec::new();
        let mut normals = Vec::new();
        for &k in &self.keys {
            let fwd = self.has_neighbor(k, e, 1);
            let back = self.has_neighbor(k, e, -1);
            if fwd && back {
                continue;
            }
            keys.push(k);
            normals.push(match (back, fwd) {
                (true, false) => 1,
                (false, true) => -1,
                _ => 0,
            });
        }
        Ok((PointSet::from_sorted_keys(self.lattice, self.shift.clone(), keys), normals))
    }

    /// Normal sign `n^i(x)` for any point of the set (0 off `∂^i A`).
    pub fn normal_at(&self, dirs: &DirectionSet, i: usize, key: u64) -> Result<i8> {
        let e = dirs.get(i)?;
        let fwd = self.has_neighbor(key, e, 1);
        let back = self.has_neighbor(key, e, -1);
        Ok(match (back, fwd) {
            (true, false) => 1,
            (false, true) => -1,
            _ => 0,
        })
    }

    pub fn derive(&self, dirs: &DirectionSet) -> Result<DerivedSets> {
        let mut duals = Vec::with_capacity(dirs.len());
        let mut directional_boundaries = Vec::with_capacity(dirs.len());
        let mut normals = Vec::with_capacity(dirs.len());
        for i in 0..dirs.len() {
            duals.push(self.dual(dirs, i)?);
            let (b, n) = self.directional_boundary(dirs, i)?;
            directional_boundaries.push(b);
            normals.push(n);
        }
        let interior = self.interior(dirs);
        let boundary = self.difference(&interior);
        Ok(DerivedSets { duals, interior, boundary, directional_boundaries, normals })
    }

    fn check_dirs(&self, dirs: &DirectionSet) -> Result<()> {
        if dirs.dim() != self.lattice.dim() {
            return Err(Error::InvalidDirections(format!(
                "direction set of dimension {} on a {}-d lattice",
                dirs.dim(),
                self.lattice.dim()
            )));
        }
        Ok(())
    }

    pub fn is_subset_of(&self, other: &PointSet) -> bool {
        self.lattice == other.lattice && self.keys.iter().all(|&k| other.contains_key(k))
    }

    pub fn same_points(&self, other: &PointSet) -> bool {
        self.lattice == other.lattice && self.keys == other.keys
    }

    pub fn difference(&self, other: &PointSet) -> PointSet {
        let keys = self
            .keys
            .iter()
            .copied()
            .filter(|&k| !other.contains_key(k))
            .collect();
        PointSet::from_sorted_keys(self.lattice, self.shift.clone(), keys)
    }

    pub fn intersection(&self, other: &PointSet) -> PointSet {
        let keys = self
            .keys
            .iter()
            .copied()
            .filter(|&k| other.contains_key(k))
            .collect();
        PointSet::from_sorted_keys(self.lattice, self.shift.clone(), keys)
    }

    pub fn union(&self, other: &PointSet) -> PointSet {
        let mut keys = self.keys.clone();
        keys.extend_from_slice(&other.keys);
        PointSet::from_keys(self.lattice, self.shift.clone(), keys)
    }

    /// Mean physical position of the points.
    pub fn centroid(&self) -> Vec<f64> {
        let d = self.lattice.dim();
        let mut c = vec![0.0; d];
        for idx in 0..self.len() {
            for (acc, x) in c.iter_mut().zip(self.position(idx)) {
                *acc += x;
            }
        }
        let n = self.len().max(1) as f64;
        c.iter_mut().for_each(|x| *x /= n);
        c
    }

    /// Euclidean diameter of the bounding box of the points.
    pub fn diameter(&self) -> f64 {
        let d = self.lattice.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for idx in 0..self.len() {
            for (a, x) in self.position(idx).into_iter().enumerate() {
                lo[a] = lo[a].min(x);
                hi[a] = hi[a].max(x);
            }
        }
        if self.is_empty() {
            return 0.0;
        }
        lo.iter().zip(&hi).map(|(l, u)| (u - l).powi(2)).sum::<f64>().sqrt()
    }
}

/// Scalar type of a field: `f64` or `Complex64`.
pub trait Value:
    Copy
    + Send
    + Sync
    + fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    fn zero() -> Self;
    fn from_f64(x: f64) -> Self;
    fn abs_sq(self) -> f64;
    fn to_complex(self) -> Complex64;
    /// Rebuilds a value from real and imaginary parts (the imaginary part is
    /// dropped for `f64`).
    fn from_parts(re: f64, im: f64) -> Self;
    const IS_COMPLEX: bool;
    fn abs(self) -> f64 {
        self.abs_sq().sqrt()
    }
}

impl Value for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn abs_sq(self) -> f64 {
        self * self
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }
    const IS_COMPLEX: bool = false;
}

impl Value for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn abs_sq(self) -> f64 {
        self.norm_sqr()
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
    const IS_COMPLEX: bool = true;
}

/// One value per point of a [`PointSet`], aligned with its iteration order.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    domain: Arc<PointSet>,
    values: Vec<T>,
}

pub type ScalarField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: Value> Field<T> {
    pub fn new(domain: impl Into<Arc<PointSet>>, values: Vec<T>) -> Result<Self> {
        let domain = domain.into();
        if domain.len() != values.len() {
            return Err(Error::DomainMismatch(format!(
                "{} values for {} points",
                values.len(),
                domain.len()
            )));
        }
        Ok(Self { domain, values })
    }

    pub fn zeros(domain: impl Into<Arc<PointSet>>) -> Self {
        let domain = domain.into();
        let values = vec![T::zero(); domain.len()];
        Self { domain, values }
    }

    pub fn constant(domain: impl Into<Arc<PointSet>>, c: T) -> Self {
        let domain = domain.into();
        let values = vec![c; domain.len()];
        Self { domain, values }
    }

    /// Samples `f(position)` at every point.
    pub fn from_fn(domain: impl Into<Arc<PointSet>>, mut f: impl FnMut(&[f64]) -> T) -> Self {
        let domain = domain.into();
        let values = (0..domain.len()).map(|i| f(&domain.position(i))).collect();
        Self { domain, values }
    }

    pub fn domain(&self) -> &PointSet {
        &self.domain
    }

    pub fn domain_arc(&self) -> &Arc<PointSet> {
        &self.domain
    }

    pub fn lattice(&self) -> &Lattice {
        self.domain.lattice()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at a point key, `None` off the domain.
    pub fn get(&self, key: u64) -> Option<T> {
        self.domain.index_of_key(key).map(|i| self.values[i])
    }

    /// Value at a point key, zero off the domain.
    pub fn get_or_zero(&self, key: u64) -> T {
        self.get(key).unwrap_or_else(T::zero)
    }

    pub fn map<U: Value>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field {
            domain: self.domain.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn check_same_domain<U>(&self, other: &Field<U>) -> Result<()> {
        if Arc::ptr_eq(&self.domain, &other.domain) || self.domain.same_points(&other.domain) {
            Ok(())
        } else {
            Err(Error::DomainMismatch(format!(
                "fields live on different sets ({} vs {} points)",
                self.domain.len(),
                other.domain.len()
            )))
        }
    }

    pub fn zip_with(&self, other: &Field<T>, f: impl Fn(T, T) -> T) -> Result<Field<T>> {
        self.check_same_domain(other)?;
        Ok(Field {
            domain: self.domain.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn mul(&self, other: &Field<T>) -> Result<Field<T>> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Field<T>) -> Result<Field<T>> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field<T>) -> Result<Field<T>> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Field<T> {
        self.map(|v| v * c)
    }

    /// Restriction to a subset of the domain.
    pub fn restrict(&self, subset: &PointSet) -> Result<Field<T>> {
        let mut values = Vec::with_capacity(subset.len());
        for &k in subset.keys() {
            match self.get(k) {
                Some(v) => values.push(v),
                None => {
                    return Err(Error::DomainMismatch(format!(
                        "restriction target point {:?} is outside the field domain",
                        self.lattice().decode(k)
                    )))
                }
            }
        }
        Field::new(subset.clone(), values)
    }

    /// Extension by zero to a superset of the domain.
    pub fn extend_to(&self, superset: impl Into<Arc<PointSet>>) -> Result<Field<T>> {
        let superset = superset.into();
        if !self.domain.is_subset_of(&superset) {
            return Err(Error::DomainMismatch(
                "extension target does not contain the field domain".into(),
            ));
        }
        let values = superset.keys().iter().map(|&k| self.get_or_zero(k)).collect();
        Field::new(superset, values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn to_complex(&self) -> ComplexField {
        self.map(|v| v.to_complex())
    }
}

impl ComplexField {
    pub fn re(&self) -> ScalarField {
        self.map(|v| v.re)
    }

    pub fn im(&self) -> ScalarField {
        self.map(|v| v.im)
    }

    pub fn from_parts(re: &ScalarField, im: &ScalarField) -> Result<ComplexField> {
        re.check_same_domain(im)?;
        let values = re
            .values()
            .iter()
            .zip(im.values())
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        Field::new(re.domain_arc().clone(), values)
    }
}

/// `∫_A u = h^d Σ u(x)`.
pub fn integrate<T: Value>(u: &Field<T>) -> T {
    let mut acc = T::zero();
    for &v in u.values() {
        acc += v;
    }
    acc * u.lattice().cell_volume()
}

/// Bilinear pairing `(u, v) = h^d Σ u v` (no conjugation).
pub fn pairing<T: Value>(u: &Field<T>, v: &Field<T>) -> Result<T> {
    Ok(integrate(&u.mul(v)?))
}

pub fn norm_l2<T: Value>(u: &Field<T>) -> f64 {
    let s: f64 = u.values().iter().map(|v| v.abs_sq()).sum();
    (s * u.lattice().cell_volume()).sqrt()
}

pub fn norm_sup<T: Value>(u: &Field<T>) -> f64 {
    u.max_abs()
}

/// `(Σ_i ∫_{A^i} σ^i |d_i u|²)^{1/2}`.
pub fn seminorm_h1<T: Value>(u: &Field<T>, sigma: &SigmaSet) -> Result<f64> {
    let dirs = sigma.directions();
    let mut total = 0.0;
    for i in 0..dirs.len() {
        let du = crate::calculus::diff(u, dirs, i)?;
        let mut acc = 0.0;
        for (idx, &key) in du.domain().keys().iter().enumerate() {
            let s = sigma.weight(i, key).ok_or_else(|| Error::MissingSigma {
                direction: i,
                point: u.lattice().decode(key),
            })?;
            if s < 0.0 {
                return Err(Error::NegativeSigma { direction: i, value: s });
            }
            acc += s * du.values()[idx].abs_sq();
        }
        total += acc;
    }
    Ok((total * u.lattice().cell_volume()).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms<T> {
    pub integral: T,
    pub l2: f64,
    pub h1_semi: Option<f64>,
    /// `‖u‖_{L²} + ‖u‖_{Ḣ¹}` (a sum, not a quadrature).
    pub h1: Option<f64>,
}

pub fn integrate_and_norms<T: Value>(u: &Field<T>, sigma: Option<&SigmaSet>) -> Result<Norms<T>> {
    let l2 = norm_l2(u);
    let h1_semi = sigma.map(|s| seminorm_h1(u, s)).transpose()?;
    Ok(Norms { integral: integrate(u), l2, h1_semi, h1: h1_semi.map(|s| s + l2) })
}

/// Which integer representative of a frequency enters `|ξ|`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyConvention {
    /// The tuple in `[0, N-1]^d` as stored.
    #[default]
    Literal,
    /// The aliased representative in `[-N/2, N/2)^d`.
    Symmetric,
}

impl FrequencyConvention {
    pub fn representative(&self, xi: &[usize], n: usize) -> Vec<f64> {
        xi.iter()
            .map(|&k| match self {
                FrequencyConvention::Literal => k as f64,
                FrequencyConvention::Symmetric => {
                    if 2 * k >= n {
                        k as f64 - n as f64
                    } else {
                        k as f64
                    }
                }
            })
            .collect()
    }

    pub fn norm_sq(&self, xi: &[usize], n: usize) -> f64 {
        self.representative(xi, n).iter().map(|x| x * x).sum()
    }
}

/// `û(ξ)` for every `ξ ∈ [0, N-1]^d`, stored lexicographically.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    lattice: Lattice,
    values: Vec<Complex64>,
}

impl SpectralField {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn index_of(&self, xi: &[usize]) -> usize {
        let n = self.lattice.n();
        xi.iter().fold(0, |acc, &k| acc * n + k)
    }

    pub fn frequency(&self, idx: usize) -> Vec<usize> {
        let n = self.lattice.n();
        let d = self.lattice.dim();
        let mut out = vec![0; d];
        let mut rest = idx;
        for slot in out.iter_mut().rev() {
            *slot = rest % n;
            rest /= n;
        }
        out
    }

    pub fn get(&self, xi: &[usize]) -> Complex64 {
        self.values[self.index_of(xi)]
    }

    /// `Σ_ξ |û(ξ)|²`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Inverse transform back to a complex field on the full grid.
    pub fn inverse(&self) -> ComplexField {
        let n = self.lattice.n();
        let mut data = self.values.clone();
        let twiddle = twiddles(n, 1.0);
        dft_axes(&mut data, n, self.lattice.dim(), &twiddle);
        Field::new(self.lattice.full(), data).expect("sizes agree")
    }
}

fn twiddles(n: usize, sign: f64) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let t = sign * 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            Complex64::new(t.cos(), t.sin())
        })
        .collect()
}

/// In-place separable direct DFT over every axis of an `N^d` array.
fn dft_axes(data: &mut [Complex64], n: usize, dim: usize, twiddle: &[Complex64]) {
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        let outer = data.len() / (n * stride);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * n * stride + inner;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                for (xi, slot) in out.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (j, &v) in line.iter().enumerate() {
                        acc += v * twiddle[(j * xi) % n];
                    }
                    *slot = acc;
                }
                for (j, &v) in out.iter().enumerate() {
                    data[base + j * stride] = v;
                }
            }
        }
    }
}

/// `û(ξ) = h^d Σ_x u(x) e^{-2iπ x·ξ}` with `u` extended by zero to the grid.
pub fn fourier_transform<T: Value>(u: &Field<T>) -> Result<SpectralField> {
    if !u.domain().is_primal() {
        return Err(Error::DomainMismatch(
            "the Fourier transform acts on primal fields".into(),
        ));
    }
    let lattice = *u.lattice();
    let n = lattice.n();
    let d = lattice.dim();
    let mut data = vec![Complex64::new(0.0, 0.0); lattice.num_points()];
    let mut coords = vec![0i64; d];
    for (idx, &key) in u.domain().keys().iter().enumerate() {
        lattice.decode_into(key, &mut coords);
        let flat = coords.iter().fold(0usize, |acc, &c| acc * n + (c / 2) as usize);
        data[flat] = u.values()[idx].to_complex();
    }
    let twiddle = twiddles(n, -1.0);
    dft_axes(&mut data, n, d, &twiddle);
    let w = lattice.cell_volume();
    data.iter_mut().for_each(|v| *v *= w);
    Ok(SpectralField { lattice, values: data })
}

/// Single coefficient `û(ξ)` for a real frequency vector, by direct summation.
pub fn fourier_coefficient<T: Value>(u: &Field<T>, xi: &[f64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (idx, v) in u.values().iter().enumerate() {
        let x = u.domain().position(idx);
        let phase: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
        let t = -2.0 * std::f64::consts::PI * phase;
        acc += v.to_complex() * Complex64::new(t.cos(), t.sin());
    }
    acc * u.lattice().cell_volume()
}

/// `‖u‖_{H^r}` from its transform, literal frequency convention.
pub fn sobolev_hr_norm(u_hat: &SpectralField, r: f64) -> f64 {
    sobolev_hr_norm_sq_with(u_hat, r, FrequencyConvention::Literal).sqrt()
}

/// `Σ_ξ |û(ξ)|² (1 + |ξ|²)^r`.
pub fn sobolev_hr_norm_sq_with(u_hat: &SpectralField, r: f64, conv: FrequencyConvention) -> f64 {
    let n = u_hat.lattice.n();
    u_hat
        .values
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let xi = u_hat.frequency(idx);
            v.norm_sqr() * (1.0 + conv.norm_sq(&xi, n)).powf(r)
        })
        .sum()
}
