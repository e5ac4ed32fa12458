//! Shared fixtures for the criterion benchmarks.

use s2k_core::active_learning::ActiveLearningConfig;
use s2k_core::pool::generate_training_pool;
use s2k_core::{Benchmark, S2KModel, Trajectory, TrainingPool};

/// One training history of `benchmark` on its default grid.
pub fn pool(benchmark: Benchmark, seed: u64) -> (TrainingPool, Vec<Trajectory>) {
    let excitation = benchmark
        .excitation_model()
        .sample(1.0, seed)
        .expect("unit magnification is always valid");
    generate_training_pool(
        benchmark.system().as_ref(),
        &[excitation],
        benchmark.default_dt(),
        benchmark.default_duration(),
    )
    .expect("benchmark integrates on its default grid")
}

/// A trained surrogate of `benchmark` from [`pool`].
pub fn trained(benchmark: Benchmark, seed: u64) -> S2KModel {
    let (pool, _) = pool(benchmark, seed);
    let configs = vec![ActiveLearningConfig::with_delta(benchmark.default_delta()); benchmark.state_dim()];
    S2KModel::train(&pool, &configs, Default::default())
        .expect("default thresholds converge")
        .0
}
