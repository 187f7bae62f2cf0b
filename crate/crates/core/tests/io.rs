use calderon_core::dtn::{dtn_map, Potential};
use calderon_core::io::*;
use calderon_core::sigma::build_sigma_uniform;
use calderon_core::*;
use num_complex::Complex64;

#[test]
fn complex_field_round_trip_is_bit_identical() {
    let l = Lattice::new(3, 8).unwrap();
    let f = ComplexField::from_fn(l.full(), |x| Complex64::new((7.0 * x[0]).sin() / 3.0, x[1] * x[2] - 0.1));
    let bytes = encode_field(&f);
    let back = decode_complex(&bytes).unwrap();
    for (a, b) in f.values().iter().zip(back.values()) {
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }
    assert_eq!(encode_field(&back), bytes);
    assert!(matches!(decode_field(&bytes).unwrap(), AnyField::Complex(_)));
    assert!(matches!(decode_real(&bytes), Err(Error::Format(_))));
}

#[test]
fn dual_field_keeps_its_shift() {
    let l = Lattice::new(2, 6).unwrap();
    let dirs = DirectionSet::canonical(2);
    let dual = l.full().dual(&dirs, 1).unwrap();
    let f = ScalarField::from_fn(dual, |x| x[0] + 10.0 * x[1]);
    let back = decode_real(&encode_field(&f)).unwrap();
    assert_eq!(back, f);
    assert_eq!(back.domain().shift(), &[1]);
}

#[test]
fn header_errors_are_reported() {
    let l = Lattice::new(2, 4).unwrap();
    let bytes = encode_field(&ScalarField::constant(l.full(), 1.0));
    assert!(matches!(decode_field(&bytes[..10]), Err(Error::Format(m)) if m.contains("size mismatch")));
    assert!(matches!(decode_field(&bytes[..bytes.len() - 8]), Err(Error::Format(m)) if m.contains("size mismatch")));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_field(&bad), Err(Error::Format(m)) if m.contains("magic")));
    let mut v = bytes.clone();
    v[4..8].copy_from_slice(&7u32.to_le_bytes());
    assert!(matches!(decode_field(&v), Err(Error::Format(m)) if m.contains("version 7")));
    let mut kind = bytes;
    kind[28] = 9;
    assert!(matches!(decode_field(&kind), Err(Error::Format(m)) if m.contains("kind")));
}

#[test]
fn json_lists_doubled_coordinates() {
    let l = Lattice::new(1, 4).unwrap();
    let f = ScalarField::from_fn(l.full(), |x| x[0]);
    let json = field_to_json(&f);
    assert_eq!(json["n"], 4);
    assert_eq!(json["points"][3][0], 6);
    assert_eq!(json["values"][2], 0.5);
}

#[test]
fn dtn_matrix_round_trip() {
    let l = Lattice::new(2, 7).unwrap();
    let sigma = build_sigma_uniform(l);
    let w = PointSet::index_box(l, &[1, 1], &[5, 4]).unwrap();
    let lam = dtn_map(&Potential::zero(w, &sigma).unwrap(), &sigma).unwrap();
    let bytes = encode_dtn(&lam.boundary_nodes, &lam.matrix);
    let (nodes, matrix) = decode_dtn(&bytes).unwrap();
    assert!(nodes.same_points(&lam.boundary_nodes));
    assert_eq!(matrix, lam.matrix);
    assert!(decode_dtn(&bytes[..bytes.len() - 1]).is_err());
}
