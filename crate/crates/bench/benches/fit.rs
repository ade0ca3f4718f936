use criterion::{black_box, criterion_group, criterion_main, Criterion};

use hsum_core::harmonic::{build_design, solve_amplitudes};
use hsum_core::lstsq::QrFactor;
use hsum_core::signal::{synth_harmonic, white_noise};
use hsum_core::{
    estimate_hr, GridSpec, HarmonicFitter, JointConfig, JointFitter, MultiAxisSignal,
    PipelineConfig, SampledSignal,
};

const FS: f64 = 125.0;
const N: usize = 1000;

fn window(f_oa: f64, f_h: f64, n: usize) -> Vec<f64> {
    let motion = synth_harmonic(f_oa, &[1.0, 0.5, 0.25], &[0.3, 0.2], 0.0, n, FS).unwrap();
    let heart = synth_harmonic(f_h, &[0.4, 0.1], &[0.2], 0.0, n, FS).unwrap();
    let noise = white_noise(n, 0.05, 7);
    (0..n)
        .map(|i| motion.samples()[i] + heart.samples()[i] + noise[i])
        .collect()
}

fn design_and_solve(c: &mut Criterion) {
    let x = window(1.37, 2.11, N);
    c.bench_function("design+qr solve, 17 harmonics + DC", |b| {
        b.iter(|| {
            let d = build_design(black_box(1.37), 17, N, FS, true).unwrap();
            solve_amplitudes(&d, &x).unwrap()
        })
    });
}

fn motion_sweep(c: &mut Criterion) {
    let x = window(1.37, 2.11, N);
    let fitter = HarmonicFitter::new(&GridSpec::motion_default(), 17, N, FS, true).unwrap();
    c.bench_function("motion grid sweep (201 points, cached)", |b| {
        b.iter(|| fitter.sweep(black_box(&x)).unwrap())
    });
}

fn joint_sweep(c: &mut Criterion) {
    let x = window(1.37, 2.11, N);
    let joint = JointFitter::new(JointConfig::default(), N, FS).unwrap();
    let motion: QrFactor = joint.motion_factor(1.37).unwrap();
    c.bench_function("joint heart sweep (251 points)", |b| {
        b.iter(|| joint.sweep(black_box(&x), &motion).unwrap())
    });
}

fn pipeline_window(c: &mut Criterion) {
    let n = N;
    let ppg = SampledSignal::new(window(1.37, 2.11, n), FS).unwrap();
    let acc = MultiAxisSignal::new(
        synth_harmonic(1.37, &[1.0, 0.5], &[0.3], 0.0, n, FS).unwrap(),
        SampledSignal::new(white_noise(n, 0.1, 1), FS).unwrap(),
        SampledSignal::new(white_noise(n, 0.1, 2), FS).unwrap(),
    )
    .unwrap();
    let cfg = PipelineConfig::default();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("one 8 s window, including fitter setup", |b| {
        b.iter(|| estimate_hr(black_box(&ppg), &acc, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, design_and_solve, motion_sweep, joint_sweep, pipeline_window);
criterion_main!(benches);
