//! Gram assembly and potential-field evaluation throughput.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use riesz_bench::sphere_cloud;
use riesz_core::kernel::{gram, potential_batch, RieszParams};
use riesz_core::measure::DiscreteMeasure;

fn bench_gram(c: &mut Criterion) {
    let params = RieszParams::newtonian();
    let mut group = c.benchmark_group("gram");
    group.sample_size(10);
    for n in [250usize, 500, 1000] {
        let cloud = sphere_cloud(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &cloud, |b, cloud| {
            b.iter(|| gram(cloud, &params).unwrap())
        });
    }
    group.finish();
}

fn bench_potential_batch(c: &mut Criterion) {
    let params = RieszParams::newtonian();
    let source = DiscreteMeasure::uniform(sphere_cloud(1000), 1.0).unwrap();
    let probes = sphere_cloud(500);
    c.bench_function("potential_batch_1000x500", |b| {
        b.iter(|| potential_batch(&source, &probes, &params))
    });
}

criterion_group!(benches, bench_gram, bench_potential_batch);
criterion_main!(benches);
