//! Equilibrium and sweep solve timings.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use riesz_bench::sphere_cloud;
use riesz_core::balayage::{sweep_onto_cloud, SweepConfig};
use riesz_core::equilibrium::{equilibrium_on_cloud, EquilibriumConfig};
use riesz_core::geometry::Point;
use riesz_core::kernel::RieszParams;
use riesz_core::measure::DiscreteMeasure;

fn bench_equilibrium(c: &mut Criterion) {
    let params = RieszParams::newtonian();
    let cfg = EquilibriumConfig::default();
    let mut group = c.benchmark_group("equilibrium");
    group.sample_size(10);
    for n in [250usize, 500, 1000] {
        let cloud = sphere_cloud(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &cloud, |b, cloud| {
            b.iter(|| equilibrium_on_cloud(cloud, &params, &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let params = RieszParams::newtonian();
    let cfg = SweepConfig::default();
    let sigma =
        DiscreteMeasure::mollified_dirac(Point::new(vec![2.0, 0.0, 0.0]), 1.0, 0.01).unwrap();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for n in [250usize, 500, 1000] {
        let cloud = sphere_cloud(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &cloud, |b, cloud| {
            b.iter(|| sweep_onto_cloud(&sigma, cloud, None, &params, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_equilibrium, bench_sweep);
criterion_main!(benches);
