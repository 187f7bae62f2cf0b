use calderon_bench::{random_field, random_potential, uniform_domain};
use calderon_core::cgo::{cgo_solve, CgoPhase};
use calderon_core::conjugate::{carleman_constant_scan, ScanOptions};
use calderon_core::dtn::dtn_map;
use calderon_core::lattice::fourier_transform;
use calderon_core::Lattice;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn fourier(c: &mut Criterion) {
    let mut group = c.benchmark_group("fourier_transform");
    for (dim, n) in [(2usize, 64usize), (3, 16), (3, 32)] {
        let l = Lattice::new(dim, n).unwrap();
        let u = random_field(l.full(), 1);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{dim}d_n{n}")), &u, |b, u| {
            b.iter(|| fourier_transform(u).unwrap())
        });
    }
    group.finish();
}

fn dtn(c: &mut Criterion) {
    let mut group = c.benchmark_group("dtn_map");
    group.sample_size(10);
    for (dim, n) in [(2usize, 32usize), (3, 16)] {
        let (sigma, dom) = uniform_domain(dim, n, 0.25, 0.75, 2);
        let q = random_potential(&sigma, &dom, 1.0, 2);
        group.bench_function(format!("{dim}d_n{n}"), |b| b.iter(|| dtn_map(&q, &sigma).unwrap()));
    }
    group.finish();
}

fn scan_point(c: &mut Criterion) {
    let mut group = c.benchmark_group("carleman_scan_point");
    group.sample_size(10);
    let (sigma, dom) = uniform_domain(3, 10, 0.3, 0.5, 1);
    let grid = vec![vec![2.0, 0.0, 0.0]];
    let opts = ScanOptions::default();
    group.bench_function("3d_n10", |b| {
        b.iter(|| carleman_constant_scan(&sigma, &dom.b, &grid, &opts).unwrap())
    });
    group.finish();
}

fn cgo(c: &mut Criterion) {
    let mut group = c.benchmark_group("cgo_solve");
    group.sample_size(10);
    let (sigma, dom) = uniform_domain(3, 10, 0.3, 0.5, 1);
    let q = random_potential(&sigma, &dom, 1.0, 3);
    let phase = CgoPhase::from_parts(&[6.0, 0.0, 0.0], &[0.0, 6.0, 0.0]).unwrap();
    group.bench_function("3d_n10", |b| b.iter(|| cgo_solve(&q, &phase, &sigma, &dom).unwrap()));
    group.finish();
}

criterion_group!(benches, fourier, dtn, scan_point, cgo);
criterion_main!(benches);
