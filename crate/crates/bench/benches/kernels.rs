use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use phasekit::bundled::{self, experiment_pulses};
use phasekit::lti::realize;
use phasekit::nrange::matrix_phase_interval;
use phasekit::phase::{lti_phase, DEFAULT_TOL};
use phasekit::signal::hilbert_real;
use phasekit::sim::{simulate_feedback, FeedbackSpec, LoopSolve, System};
use phasekit::FrequencyGrid;
use phasekit_bench::{sectorial_matrix, test_signal};

fn hilbert(c: &mut Criterion) {
    let mut g = c.benchmark_group("hilbert");
    for len in [4096, 65_536] {
        let u = test_signal(len, 2, 1e-3);
        g.bench_with_input(BenchmarkId::from_parameter(len), &u, |b, u| b.iter(|| hilbert_real(black_box(u)).unwrap()));
    }
    g.finish();
}

fn matrix_phase(c: &mut Criterion) {
    let mut g = c.benchmark_group("matrix_phase_interval");
    for n in [2, 8, 32] {
        let a = sectorial_matrix(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| b.iter(|| matrix_phase_interval(black_box(a), DEFAULT_TOL).unwrap()));
    }
    g.finish();
}

fn system_phase(c: &mut Criterion) {
    let p = bundled::mimo_plant();
    let mut g = c.benchmark_group("lti_phase");
    g.sample_size(10);
    for points in [200, 2000] {
        let grid = FrequencyGrid::log(1e-3, 1e4, points).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(points), &grid, |b, grid| b.iter(|| lti_phase(&p, grid, DEFAULT_TOL).unwrap()));
    }
    g.finish();
}

fn feedback(c: &mut Criterion) {
    let plant = System::Lti(realize(&bundled::mimo_plant()).unwrap());
    let ctrl = bundled::cubic_controller();
    let (e1, e2) = experiment_pulses(1e-3, 10.0).unwrap();
    let mut g = c.benchmark_group("simulate_feedback");
    g.sample_size(10);
    g.bench_function("mimo_cubic_10s", |b| {
        b.iter(|| simulate_feedback(&FeedbackSpec { p: &plant, c: &ctrl, e1: &e1, e2: &e2, solve: LoopSolve::Auto }).unwrap())
    });
    g.finish();
}

criterion_group!(benches, hilbert, matrix_phase, system_phase, feedback);
criterion_main!(benches);
