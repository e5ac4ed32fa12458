use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use s2k_bench::{pool, trained};
use s2k_core::active_learning::{acquisition, run_component, ActiveLearningConfig};
use s2k_core::kriging::{fit, KrigingConfig};
use s2k_core::narx::{NarxConfig, NarxModel};
use s2k_core::{Benchmark, PredictionMode};

fn kriging(c: &mut Criterion) {
    let (pool, _) = pool(Benchmark::Duffing, 1);
    let rows: Vec<usize> = (0..pool.len()).step_by(pool.len() / 100).collect();
    let inputs = pool.inputs.select_rows(&rows);
    let outputs: Vec<f64> = rows.iter().map(|&r| pool.outputs.get(r, 1)).collect();
    let config = KrigingConfig::default();

    c.bench_function("kriging_fit_100", |b| b.iter(|| fit(black_box(&inputs), &outputs, &config).unwrap()));
    let model = fit(&inputs, &outputs, &config).unwrap();
    c.bench_function("kriging_predict_100", |b| b.iter(|| model.predict(black_box(pool.inputs.row(7))).unwrap()));
    c.bench_function("acquisition_pool", |b| b.iter(|| acquisition(black_box(&model), &pool, 1).unwrap()));
}

fn active_learning(c: &mut Criterion) {
    let (pool, _) = pool(Benchmark::Duffing, 1);
    let config = ActiveLearningConfig::with_delta(Benchmark::Duffing.default_delta());
    let mut group = c.benchmark_group("active_learning");
    group.sample_size(10);
    group.bench_function("duffing_velocity", |b| b.iter(|| run_component(black_box(&pool), 1, &config).unwrap()));
    group.finish();
}

fn emulation(c: &mut Criterion) {
    let b = Benchmark::Duffing;
    let model = trained(b, 1);
    let excitation = b.excitation_model().sample(1.0, 99).unwrap();
    let x0 = vec![0.0; b.state_dim()];
    let mut group = c.benchmark_group("emulation");
    group.sample_size(10);
    group.bench_function("duffing_mean", |bench| {
        bench.iter(|| {
            model
                .emulate(&excitation, black_box(&x0), b.default_dt(), b.default_duration(), PredictionMode::Mean)
                .unwrap()
        })
    });
    group.finish();
}

fn narx(c: &mut Criterion) {
    let b = Benchmark::Duffing;
    let (_, trajectories) = pool(b, 1);
    let x = trajectories[0].state_series(0);
    let histories = [(trajectories[0].excitation.as_slice(), x.as_slice())];
    let config = NarxConfig::for_benchmark(b);
    let mut group = c.benchmark_group("narx");
    group.sample_size(10);
    group.bench_function("duffing_fit", |bench| bench.iter(|| NarxModel::fit(black_box(&histories), &config).unwrap()));
    group.finish();
}

criterion_group!(benches, kriging, active_learning, emulation, narx);
criterion_main!(benches);
