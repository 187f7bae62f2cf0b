//! Binary and JSON encodings of fields and DtN matrices.
//!
//! Field layout, all little-endian:
//! `"CALF"`, version `u32`, `d u32`, `N u32`, shift mask `u32`, point count
//! `u64`, kind `u8` (0 real, 1 complex), the values as binary64 (re/im pairs
//! for complex), then the point keys as `u64` in iteration order.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{ComplexField, Field, Lattice, PointSet, ScalarField, Value};

pub const MAGIC: &[u8; 4] = b"CALF";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 4 + 8 + 1;

const DTN_MAGIC: &[u8; 4] = b"CALD";

fn kind_of<T: Value>() -> u8 {
    u8::from(T::IS_COMPLEX)
}

pub fn encode_field<T: Value>(f: &Field<T>) -> Vec<u8> {
    let lattice = f.lattice();
    let stride = if T::IS_COMPLEX { 16 } else { 8 };
    let mut out = Vec::with_capacity(HEADER_LEN + f.len() * (stride + 8));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(lattice.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(lattice.n() as u32).to_le_bytes());
    out.extend_from_slice(&f.domain().shift_mask().to_le_bytes());
    out.extend_from_slice(&(f.len() as u64).to_le_bytes());
    out.push(kind_of::<T>());
    for v in f.values() {
        let c = v.to_complex();
        out.extend_from_slice(&c.re.to_le_bytes());
        if T::IS_COMPLEX {
            out.extend_from_slice(&c.im.to_le_bytes());
        }
    }
    for &k in f.domain().keys() {
        out.extend_from_slice(&k.to_le_bytes());
    }
    out
}

/// A decoded field of either scalar kind.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyField {
    Real(ScalarField),
    Complex(ComplexField),
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> &'a [u8] {
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        s
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take(4).try_into().unwrap())
    }
    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take(8).try_into().unwrap())
    }
    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take(8).try_into().unwrap())
    }
}

pub fn decode_field(bytes: &[u8]) -> Result<AnyField> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("size mismatch: {} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic: not a CALF field file".into()));
    }
    let mut c = Cursor { bytes, pos: 4 };
    let version = c.u32();
    if version != VERSION {
        return Err(Error::Format(format!("unsupported format version {version} (expected {VERSION})")));
    }
    let dim = c.u32() as usize;
    let n = c.u32() as usize;
    let mask = c.u32();
    let count = c.u64() as usize;
    let kind = c.take(1)[0];
    let stride = match kind {
        0 => 8,
        1 => 16,
        k => return Err(Error::Format(format!("unknown value kind {k}"))),
    };
    let expected = count
        .checked_mul(stride + 8)
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format("size mismatch: point count overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!("size mismatch: expected {expected} bytes, found {}", bytes.len())));
    }
    let lattice = Lattice::new(dim, n)?;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let re = c.f64();
        let im = if kind == 1 { c.f64() } else { 0.0 };
        values.push(Complex64::new(re, im));
    }
    let keys: Vec<u64> = (0..count).map(|_| c.u64()).collect();
    if !keys.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Format("point keys are not in iteration order".into()));
    }
    let shift: Vec<usize> = (0..32).filter(|b| mask & (1 << b) != 0).collect();
    for &k in &keys {
        let coords = lattice.decode(k);
        if lattice.encode(&coords) != Some(k) {
            return Err(Error::Format(format!("key {k} is outside the lattice")));
        }
    }
    let domain = PointSet::from_keys(lattice, shift, keys);
    Ok(if kind == 1 {
        AnyField::Complex(Field::new(domain, values)?)
    } else {
        AnyField::Real(Field::new(domain, values.into_iter().map(|v| v.re).collect())?)
    })
}

pub fn decode_real(bytes: &[u8]) -> Result<ScalarField> {
    match decode_field(bytes)? {
        AnyField::Real(f) => Ok(f),
        AnyField::Complex(_) => Err(Error::Format("expected a real field, found a complex one".into())),
    }
}

pub fn decode_complex(bytes: &[u8]) -> Result<ComplexField> {
    match decode_field(bytes)? {
        AnyField::Complex(f) => Ok(f),
        AnyField::Real(f) => Ok(f.to_complex()),
    }
}

#[derive(Serialize)]
struct FieldJson<'a, V: Serialize> {
    dim: usize,
    n: usize,
    shift: &'a [usize],
    points: Vec<Vec<i64>>,
    values: Vec<V>,
}

/// JSON export with doubled coordinates, in iteration order.
pub fn field_to_json<T: Value>(f: &Field<T>) -> serde_json::Value {
    let points = (0..f.len()).map(|i| f.domain().coords(i)).collect();
    let json = if T::IS_COMPLEX {
        serde_json::to_value(FieldJson {
            dim: f.lattice().dim(),
            n: f.lattice().n(),
            shift: f.domain().shift(),
            points,
            values: f.values().iter().map(|v| {
                let c = v.to_complex();
                [c.re, c.im]
            }).collect(),
        })
    } else {
        serde_json::to_value(FieldJson {
            dim: f.lattice().dim(),
            n: f.lattice().n(),
            shift: f.domain().shift(),
            points,
            values: f.values().iter().map(|v| v.to_complex().re).collect(),
        })
    };
    json.expect("plain data serializes")
}

/// `"CALD"`, version, `d`, `N`, boundary count `u64`, doubled coordinates
/// (`i64` each), then the row-major matrix.
pub fn encode_dtn(boundary: &PointSet, matrix: &DMatrix<f64>) -> Vec<u8> {
    let lattice = boundary.lattice();
    let nb = boundary.len();
    let mut out = Vec::with_capacity(24 + nb * lattice.dim() * 8 + nb * nb * 8);
    out.extend_from_slice(DTN_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(lattice.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(lattice.n() as u32).to_le_bytes());
    out.extend_from_slice(&(nb as u64).to_le_bytes());
    for i in 0..nb {
        for c in boundary.coords(i) {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for r in 0..nb {
        for c in 0..nb {
            out.extend_from_slice(&matrix[(r, c)].to_le_bytes());
        }
    }
    out
}

pub fn decode_dtn(bytes: &[u8]) -> Result<(PointSet, DMatrix<f64>)> {
    if bytes.len() < 24 || &bytes[..4] != DTN_MAGIC {
        return Err(Error::Format("not a DtN matrix file".into()));
    }
    let mut c = Cursor { bytes, pos: 4 };
    let version = c.u32();
    if version != VERSION {
        return Err(Error::Format(format!("unsupported format version {version} (expected {VERSION})")));
    }
    let dim = c.u32() as usize;
    let n = c.u32() as usize;
    let nb = c.u64() as usize;
    let expected = nb
        .checked_mul(dim * 8)
        .and_then(|a| nb.checked_mul(nb).and_then(|b| b.checked_mul(8)).and_then(|b| b.checked_add(a)))
        .and_then(|b| b.checked_add(24))
        .ok_or_else(|| Error::Format("size mismatch: node count overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!("size mismatch: expected {expected} bytes, found {}", bytes.len())));
    }
    let lattice = Lattice::new(dim, n)?;
    let coords: Vec<Vec<i64>> = (0..nb)
        .map(|_| (0..dim).map(|_| c.u64() as i64).collect())
        .collect();
    let boundary = PointSet::from_coords(lattice, Vec::new(), coords)?;
    if boundary.len() != nb {
        return Err(Error::Format("duplicate boundary nodes".into()));
    }
    let data: Vec<f64> = (0..nb * nb).map(|_| c.f64()).collect();
    Ok((boundary, DMatrix::from_row_slice(nb, nb, &data)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_round_trip() {
        let l = Lattice::new(2, 5).unwrap();
        let f = ScalarField::from_fn(l.full(), |x| x[0] - 3.0 * x[1]);
        assert_eq!(decode_real(&encode_field(&f)).unwrap(), f);
    }

    #[test]
    fn rejects_other_versions_and_truncation() {
        let l = Lattice::new(1, 4).unwrap();
        let f = ScalarField::from_fn(l.full(), |x| x[0]);
        let mut bytes = encode_field(&f);
        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(decode_field(truncated), Err(Error::Format(m)) if m.contains("size mismatch")));
        bytes[4] = 2;
        assert!(matches!(decode_field(&bytes), Err(Error::Format(m)) if m.contains("version 2")));
    }
}
