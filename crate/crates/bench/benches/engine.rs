use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use synscale::connectivity::{gen_fixed_outdegree, to_sparse};
use synscale::engine::{propagate, Connectivity};
use synscale::occupancy::KernelSpec;
use synscale::*;

fn step_dense_vs_sparse(c: &mut Criterion) {
    let mut group = c.benchmark_group("izhikevich_100_steps");
    for n_conn in [50, 200, 800] {
        let mut spec = build_izhikevich_net(1000, n_conn, 0.8, 1.0, 42).unwrap();
        spec.duration_ms = 100.0;
        for (label, storage) in [("dense", StorageChoice::Dense), ("sparse", StorageChoice::Sparse)] {
            group.bench_with_input(BenchmarkId::new(label, n_conn), &spec, |b, spec| {
                b.iter(|| run(black_box(spec), storage).unwrap())
            });
        }
    }
    group.finish();
}

fn propagation(c: &mut Criterion) {
    let mut group = c.benchmark_group("propagate_50_spikes");
    let spikes: Vec<usize> = (0..1000).step_by(20).collect();
    for n_conn in [10, 100, 1000] {
        let dense = gen_fixed_outdegree(1000, 1000, n_conn, WeightDist::Uniform { lo: 0.0, hi: 0.5 }, Sign::Excitatory, 1).unwrap();
        let sparse = Connectivity::Sparse(to_sparse(&dense));
        let dense = Connectivity::Dense(dense);
        let mut input = vec![0.0 as Real; 1000];
        group.bench_function(BenchmarkId::new("dense", n_conn), |b| {
            b.iter(|| propagate(&dense, black_box(&spikes), &mut input).unwrap())
        });
        group.bench_function(BenchmarkId::new("sparse", n_conn), |b| {
            b.iter(|| propagate(&sparse, black_box(&spikes), &mut input).unwrap())
        });
    }
    group.finish();
}

fn fitting(c: &mut Criterion) {
    let points: Vec<(f64, f64)> = (100..=1000).step_by(50).map(|x| x as f64).map(|x| (x, 1318.0 / (109.9 + x) - 0.28)).collect();
    c.bench_function("fit_gscale_19_points", |b| b.iter(|| fit_gscale(black_box(&points)).unwrap()));
}

fn occupancy_model(c: &mut Criterion) {
    let dev = device_preset("cc30").unwrap();
    let k = KernelSpec { threads_per_block: 256, regs_per_thread: 40, shared_mem_per_block: 4096 };
    c.bench_function("occupancy", |b| b.iter(|| occupancy(black_box(&dev), black_box(&k)).unwrap()));
    c.bench_function("recommend_block_size", |b| b.iter(|| recommend_block_size(black_box(&dev), 40, 4096).unwrap()));
}

criterion_group!(benches, step_dense_vs_sparse, propagation, fitting, occupancy_model);
criterion_main!(benches);
