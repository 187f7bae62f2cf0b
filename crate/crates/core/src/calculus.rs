//! Average and difference operators along the stencil directions, zero
//! extension, the discrete Laplacian and the discrete normal derivative.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{DirectionSet, Field, PointSet, Value};
use crate::linalg::CsrMatrix;
use crate::sigma::SigmaSet;

/// Applies `f(u(y + h e_i/2), u(y - h e_i/2))` on the dual set `A^i`.
fn along<T: Value>(
    u: &Field<T>,
    dirs: &DirectionSet,
    i: usize,
    f: impl Fn(T, T) -> T,
) -> Result<Field<T>> {
    let e = dirs.get(i)?;
    let dual = u.domain().dual(dirs, i)?;
    let lattice = *u.lattice();
    let mut values = Vec::with_capacity(dual.len());
    for &y in dual.keys() {
        let plus = lattice.offset_key(y, e, 1).and_then(|k| u.get(k));
        let minus = lattice.offset_key(y, e, -1).and_then(|k| u.get(k));
        match (plus, minus) {
            (Some(p), Some(m)) => values.push(f(p, m)),
            _ => unreachable!("dual points have both endpoints in the set"),
        }
    }
    Field::new(dual, values)
}

/// `a_i(u)(y) = ½(u(y + h e_i/2) + u(y - h e_i/2))` on `A^i`.
pub fn avg<T: Value>(u: &Field<T>, dirs: &DirectionSet, i: usize) -> Result<Field<T>> {
    along(u, dirs, i, |p, m| (p + m) * 0.5)
}

/// `d_i(u)(y) = (u(y + h e_i/2) - u(y - h e_i/2)) / h` on `A^i`.
pub fn diff<T: Value>(u: &Field<T>, dirs: &DirectionSet, i: usize) -> Result<Field<T>> {
    let inv_h = 1.0 / u.lattice().h();
    along(u, dirs, i, move |p, m| (p - m) * inv_h)
}

/// Zero extension of `v` to `target` (which must contain the domain of `v`).
pub fn extend_by_zero<T: Value>(v: &Field<T>, target: impl Into<Arc<PointSet>>) -> Result<Field<T>> {
    v.extend_to(target)
}

/// Extension of a field on `W ⊂ K̊` by zero to the full grid `K`.
pub fn extend_primal<T: Value>(v: &Field<T>, dirs: &DirectionSet) -> Result<Field<T>> {
    let full = v.lattice().full();
    let interior = full.interior(dirs);
    if !v.domain().is_subset_of(&interior) {
        return Err(Error::NotInterior("W must lie in the interior of K".into()));
    }
    v.extend_to(full)
}

/// Extension of a field on `W^i` (with `W ⊂ K̊`) by zero to the dual grid `K^i`.
pub fn extend_dual<T: Value>(v: &Field<T>, dirs: &DirectionSet, i: usize) -> Result<Field<T>> {
    let e = dirs.get(i)?;
    let full = v.lattice().full();
    let interior = full.interior(dirs);
    let lattice = *v.lattice();
    for &y in v.domain().keys() {
        let ok = [1, -1].iter().all(|&s| {
            lattice.offset_key(y, e, s).is_some_and(|k| interior.contains_key(k))
        });
        if !ok {
            return Err(Error::NotInterior(format!(
                "dual point {:?} has an endpoint outside the interior of K",
                lattice.decode(y)
            )));
        }
    }
    v.extend_to(full.dual(dirs, i)?)
}

/// `Δ_h u = Σ_i d_i(σ^i d_i u)` on the interior of the domain of `u`.
pub fn laplacian<T: Value>(u: &Field<T>, sigma: &SigmaSet) -> Result<Field<T>> {
    let dirs = sigma.directions();
    let rows = u.domain().interior(dirs);
    let lattice = *u.lattice();
    let inv_h2 = 1.0 / (lattice.h() * lattice.h());
    let mut values = Vec::with_capacity(rows.len());
    for &x in rows.keys() {
        let ux = u.get(x).unwrap();
        let mut acc = T::zero();
        for i in 0..dirs.len() {
            let e = dirs.get(i)?;
            let (sp, sm) = sigma.weights_around(i, x)?;
            let up = u.get(lattice.offset_key(x, e, 2).unwrap()).unwrap();
            let um = u.get(lattice.offset_key(x, e, -2).unwrap()).unwrap();
            acc += ((up - ux) * sp - (ux - um) * sm) * inv_h2;
        }
        values.push(acc);
    }
    Field::new(rows, values)
}

/// `σ^i d_i u` on `W^i` with missing weights reported.
fn flux<T: Value>(u: &Field<T>, sigma: &SigmaSet, i: usize) -> Result<Field<T>> {
    let du = diff(u, sigma.directions(), i)?;
    let mut values = du.values().to_vec();
    for (idx, &y) in du.domain().keys().iter().enumerate() {
        let s = sigma.weight(i, y).ok_or_else(|| Error::MissingSigma {
            direction: i,
            point: u.lattice().decode(y),
        })?;
        values[idx] = values[idx] * s;
    }
    Field::new(du.domain_arc().clone(), values)
}

/// Discrete normal derivative on `∂W`:
/// `∂_n u(x) = -h Σ_i d_i(I(σ^i d_i u))(x)`, where `I` extends by zero off `W^i`.
///
/// Along directions where `x` lies on `∂^i W` this is `2 a_i(I(σ^i d_i u)) n^i`;
/// along directions where `x` has both neighbours in `W` it adds the
/// tangential flux difference, which Green's formula requires.
pub fn normal_derivative<T: Value>(u: &Field<T>, sigma: &SigmaSet) -> Result<Field<T>> {
    let dirs = sigma.directions();
    let w = u.domain();
    let boundary = w.boundary(dirs);
    let lattice = *u.lattice();
    let mut values = vec![T::zero(); boundary.len()];
    for i in 0..dirs.len() {
        let e = dirs.get(i)?;
        let f = flux(u, sigma, i)?;
        for (idx, &x) in boundary.keys().iter().enumerate() {
            let fp = lattice.offset_key(x, e, 1).map_or(T::zero(), |k| f.get_or_zero(k));
            let fm = lattice.offset_key(x, e, -1).map_or(T::zero(), |k| f.get_or_zero(k));
            values[idx] += fm - fp;
        }
    }
    Field::new(boundary, values)
}

/// The normal derivative restricted to the directions where `x ∈ ∂^i W`:
/// `Σ_i 2 a_i(I(σ^i d_i u)) n^i`. It agrees with [`normal_derivative`] at
/// points with no tangential direction (all points in 1-d).
pub fn normal_derivative_normal_part<T: Value>(u: &Field<T>, sigma: &SigmaSet) -> Result<Field<T>> {
    let dirs = sigma.directions();
    let w = u.domain();
    let boundary = w.boundary(dirs);
    let lattice = *u.lattice();
    let mut values = vec![T::zero(); boundary.len()];
    for i in 0..dirs.len() {
        let e = dirs.get(i)?;
        let f = flux(u, sigma, i)?;
        for (idx, &x) in boundary.keys().iter().enumerate() {
            let n = w.normal_at(dirs, i, x)?;
            if n == 0 {
                continue;
            }
            let fp = lattice.offset_key(x, e, 1).map_or(T::zero(), |k| f.get_or_zero(k));
            let fm = lattice.offset_key(x, e, -1).map_or(T::zero(), |k| f.get_or_zero(k));
            values[idx] += (fp + fm) * f64::from(n);
        }
    }
    Field::new(boundary, values)
}

/// [`normal_derivative`] as a matrix: rows on `∂W`, columns on `W`.
pub fn normal_derivative_matrix(w: &PointSet, sigma: &SigmaSet) -> Result<CsrMatrix> {
    let dirs = sigma.directions();
    let boundary = w.boundary(dirs);
    let lattice = *w.lattice();
    let inv_h = 1.0 / lattice.h();
    let mut triplets = Vec::new();
    for i in 0..dirs.len() {
        let e = dirs.get(i)?;
        for (r, &x) in boundary.keys().iter().enumerate() {
            for sign in [1i64, -1] {
                // flux at y = x + sign e/2 enters with weight -sign
                let Some(y) = lattice.offset_key(x, e, sign) else { continue };
                let (Some(up), Some(um)) = (lattice.offset_key(y, e, 1), lattice.offset_key(y, e, -1)) else {
                    continue;
                };
                let (Some(cp), Some(cm)) = (w.index_of_key(up), w.index_of_key(um)) else { continue };
                let s = sigma.weight(i, y).ok_or_else(|| Error::MissingSigma {
                    direction: i,
                    point: lattice.decode(y),
                })?;
                let c = -(sign as f64) * s * inv_h;
                triplets.push((r, cp, c));
                triplets.push((r, cm, -c));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(boundary.len(), w.len(), triplets))
}

/// `(1/h) ∫_{∂W} g = h^{d-1} Σ g`.
pub fn boundary_integral<T: Value>(g: &Field<T>) -> T {
    crate::lattice::integrate(g) * (1.0 / g.lattice().h())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Lattice, ScalarField};
    use crate::sigma::build_sigma_uniform;

    #[test]
    fn avg_of_alternating_field() {
        let l = Lattice::new(1, 5).unwrap();
        let dirs = DirectionSet::canonical(1);
        let u = ScalarField::new(l.full(), vec![0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let a = avg(&u, &dirs, 0).unwrap();
        assert_eq!(a.values(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn bad_direction_index() {
        let l = Lattice::new(1, 5).unwrap();
        let u = ScalarField::constant(l.full(), 1.0);
        assert!(matches!(
            diff(&u, &DirectionSet::canonical(1), 3),
            Err(Error::DirectionOutOfRange { index: 3, count: 1 })
        ));
    }

    #[test]
    fn normal_derivative_of_linear_function_1d() {
        let l = Lattice::new(1, 8).unwrap();
        let sigma = build_sigma_uniform(l);
        let w = PointSet::from_indices(l, (1..=6).map(|k| [k])).unwrap();
        let u = Field::from_fn(w, |x| x[0]);
        let dn = normal_derivative(&u, &sigma).unwrap();
        let lit = normal_derivative_normal_part(&u, &sigma).unwrap();
        assert_eq!(dn.values().len(), 2);
        assert!((dn.values()[0] + 1.0).abs() < 1e-12);
        assert!((dn.values()[1] - 1.0).abs() < 1e-12);
        assert_eq!(dn, lit);
    }

    #[test]
    fn normal_derivative_matrix_matches_field_version() {
        let l = Lattice::new(2, 7).unwrap();
        let sigma = crate::sigma::build_sigma_nine_point(l, 0.7, 0.2).unwrap();
        let w = PointSet::index_box(l, &[1, 2], &[5, 4]).unwrap();
        let u = Field::from_fn(w.clone(), |x| (3.0 * x[0]).sin() + x[1] * x[1]);
        let dn = normal_derivative(&u, &sigma).unwrap();
        let m = normal_derivative_matrix(&w, &sigma).unwrap();
        let mv = m.matvec(u.values());
        for (a, b) in mv.iter().zip(dn.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
