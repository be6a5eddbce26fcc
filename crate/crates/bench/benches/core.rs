use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ecf_toolkit::depset::{enumerate_vertices, halfspaces_from_ecf};
use ecf_toolkit::ecf::{compute_tau, compute_tau_direct, ecf_from_tau, random_valid_ecf, validate_ecf};
use ecf_toolkit::models::br_ecf_mc;
use ecf_toolkit::tm::{empirical_ecf_all, simulate_tm, tm_from_ecf};
use ecf_toolkit::{GroundSet, VariogramSpec};

fn tau(c: &mut Criterion) {
    let mut g = c.benchmark_group("tau");
    for m in [4, 8, 12, 16] {
        let ecf = random_valid_ecf(m, 2 * m, 1).unwrap();
        g.throughput(Throughput::Elements(1 << m));
        g.bench_with_input(BenchmarkId::new("compute_tau", m), &ecf, |b, e| {
            b.iter(|| compute_tau(black_box(e)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("validate_ecf", m), &ecf, |b, e| b.iter(|| validate_ecf(black_box(e))));
        let t = compute_tau(&ecf).unwrap();
        g.bench_with_input(BenchmarkId::new("ecf_from_tau", m), &t, |b, t| {
            b.iter(|| ecf_from_tau(black_box(t)).unwrap())
        });
        if m <= 8 {
            g.bench_with_input(BenchmarkId::new("compute_tau_direct", m), &ecf, |b, e| {
                b.iter(|| compute_tau_direct(black_box(e)).unwrap())
            });
        }
    }
    g.finish();
}

fn vertices(c: &mut Criterion) {
    let mut g = c.benchmark_group("vertices");
    g.sample_size(10);
    for m in [3, 4, 5, 6] {
        let ecf = random_valid_ecf(m, 3 * m, 2).unwrap();
        let hs = halfspaces_from_ecf(&ecf).unwrap();
        g.bench_with_input(BenchmarkId::new("enumerate", m), &hs, |b, hs| {
            b.iter(|| enumerate_vertices(black_box(hs), m).unwrap())
        });
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulation");
    g.sample_size(10);
    let n = 100_000;
    g.throughput(Throughput::Elements(n as u64));
    for m in [2, 4, 8] {
        let p = tm_from_ecf(&random_valid_ecf(m, 2 * m, 3).unwrap()).unwrap();
        g.bench_with_input(BenchmarkId::new("simulate_tm", m), &p, |b, p| {
            b.iter(|| simulate_tm(black_box(p), n, 7).unwrap())
        });
        let batch = simulate_tm(&p, n, 7).unwrap();
        g.bench_with_input(BenchmarkId::new("empirical_ecf_all", m), &batch, |b, s| {
            b.iter(|| empirical_ecf_all(black_box(s), m).unwrap())
        });
    }
    let coords: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, (i * i) as f64 / 4.0]).collect();
    let sites = GroundSet::indexed(4).unwrap().with_coords(coords).unwrap();
    let v = VariogramSpec::new(1.0, 1.5).unwrap();
    g.bench_function("br_ecf_mc/4", |b| b.iter(|| br_ecf_mc(black_box(&sites), &v, n, 7).unwrap()));
    g.finish();
}

criterion_group!(benches, tau, vertices, simulation);
criterion_main!(benches);
