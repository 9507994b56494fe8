use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use trps_bench::{doublet_frequencies, no_switch_problem};
use trps_core::{analytic_map, propagate, sensor_map};

fn propagation(c: &mut Criterion) {
    let mut group = c.benchmark_group("propagate");
    for t_end in [0.05, 0.1] {
        let p = no_switch_problem(t_end, &[]).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(t_end), &p, |b, p| {
            b.iter(|| propagate(black_box(&p.rho0), &p.generator, &p.grid).unwrap())
        });
    }
    group.finish();
}

fn sensor(c: &mut Criterion) {
    let mut group = c.benchmark_group("sensor_map");
    group.sample_size(10);
    for n in [4, 16] {
        let w = doublet_frequencies(n);
        let p = no_switch_problem(0.05, &w).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &w, |b, w| {
            b.iter(|| sensor_map(&p, black_box(w), 50.0, 1e-3).unwrap())
        });
    }
    group.finish();
}

fn analytic(c: &mut Criterion) {
    let mut group = c.benchmark_group("analytic_map");
    group.sample_size(10);
    for n in [4, 16] {
        let w = doublet_frequencies(n);
        let p = no_switch_problem(0.05, &w).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &w, |b, w| {
            b.iter(|| analytic_map(&p, black_box(w), 200.0, None, 0.0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, propagation, sensor, analytic);
criterion_main!(benches);
