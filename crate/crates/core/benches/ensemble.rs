use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sticky_core::ensemble::{map_paths_parallel, map_paths_sequential};
use sticky_core::simulator::simulate;
use sticky_core::{DensitySuite, DomainGeometry, PairPotential, SimConfig};

fn config() -> SimConfig {
    let suite = DensitySuite::uniform(3, 0)
        .unwrap()
        .with_pair(PairPotential::gaussian(1.0, 0.3).unwrap());
    SimConfig::new(DomainGeometry::centered_ball(2, 1.0).unwrap(), suite, 2.0, 42)
}

fn ensemble(c: &mut Criterion) {
    let cfg = config();
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    for paths in [8u64, 32] {
        group.bench_with_input(BenchmarkId::new("sequential", paths), &paths, |b, &n| {
            b.iter(|| map_paths_sequential(n, |p| simulate(&cfg, p).map(|t| t.boundary_time[0])).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("parallel", paths), &paths, |b, &n| {
            b.iter(|| map_paths_parallel(n, |p| simulate(&cfg, p).map(|t| t.boundary_time[0])).unwrap())
        });
    }
    group.finish();
    black_box(());
}

criterion_group!(benches, ensemble);
criterion_main!(benches);
