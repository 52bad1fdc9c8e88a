use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;
use sirabc::abc::{kernel_weights, tolerance_from_rate};
use sirabc::adjust::{nch_fit, MlpConfig, NchConfig};
use sirabc::experiments::ModelSetup;
use sirabc::model::{Theta, Variant};
use sirabc::rng::rng_from_seed;
use sirabc::summaries::{l1_distance, DetectionRecorder, StepPath};

fn theta() -> Theta {
    Theta {
        mu1: 2e-6,
        lambda1: 1.14e-7,
        lambda2: 0.375,
        lambda3: 6.55e-5,
        c: 1.0,
    }
}

fn simulate(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate");
    g.sample_size(20);
    for (name, mu0) in [("closed", 0.0), ("demography", 1.0 / 35.0)] {
        let setup = ModelSetup {
            mu0,
            ..ModelSetup::hiv_study()
        };
        let mut seed = 0;
        g.bench_function(BenchmarkId::new("hiv_6y", name), |b| {
            b.iter(|| {
                seed += 1;
                let mut sink = DetectionRecorder::default();
                setup
                    .run(theta(), &mut rng_from_seed(seed), &mut sink)
                    .unwrap();
                black_box(sink.screen.len())
            })
        });
    }
    let small = ModelSetup {
        s0: 1000,
        i0: 10,
        horizon: 6.0,
        variant: Variant::MassAction,
        mu0: 0.0,
        max_events: 1_000_000,
    };
    let th = Theta {
        lambda1: 5e-4,
        lambda2: 0.3,
        lambda3: 0.01,
        ..theta()
    };
    let mut seed = 0;
    g.bench_function("s0_1000", |b| {
        b.iter(|| {
            seed += 1;
            black_box(small.simulate_path(th, seed).unwrap().events.len())
        })
    });
    g.finish();
}

fn counting(n: usize, seed: u64) -> StepPath {
    let mut rng = rng_from_seed(seed);
    let mut t: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 6.0).collect();
    t.sort_by(f64::total_cmp);
    StepPath::counting(0, &t, 6.0).unwrap()
}

fn distance(c: &mut Criterion) {
    let mut g = c.benchmark_group("l1_distance");
    for n in [100, 1000, 10_000] {
        let (a, b) = (counting(n, 1), counting(n, 2));
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |bch, _| {
            bch.iter(|| l1_distance(black_box(&a), black_box(&b), 6.0).unwrap())
        });
    }
    g.finish();
}

fn weights(c: &mut Criterion) {
    let mut rng = rng_from_seed(3);
    let d: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
    c.bench_function("weights_100k_rate_0.01", |b| {
        b.iter(|| {
            let delta = tolerance_from_rate(black_box(&d), 0.01).unwrap();
            kernel_weights(&d, delta)
        })
    });
}

fn nch(c: &mut Criterion) {
    let mut rng = rng_from_seed(4);
    let n = 500;
    let stats: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..21).map(|_| rng.random::<f64>()).collect())
        .collect();
    let theta: Vec<f64> = stats.iter().map(|s| s[0] * 2.0 + s[1]).collect();
    let w = vec![1.0; n];
    let cfg = NchConfig {
        members: 2,
        mlp: MlpConfig {
            epochs: 500,
            ..MlpConfig::default()
        },
        ..NchConfig::default()
    };
    let mut g = c.benchmark_group("nch_fit");
    g.sample_size(10);
    g.bench_function("n500_d21_2x2_nets", |b| {
        b.iter(|| nch_fit(&theta, &stats, &w, &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, simulate, distance, weights, nch);
criterion_main!(benches);
