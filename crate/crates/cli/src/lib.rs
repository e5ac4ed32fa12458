//! Experiment driver: data generation, surrogate training, emulation,
//! scoring, NARX comparison and repetition studies, with every run
//! reproducible from the manifest it writes.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{ExperimentConfig, SigmaPolicy};
pub use experiment::{
    compare_narx, repeat, replay, run_experiment, Command, ExperimentOutcome, Manifest, Stage, StageError,
};
pub use report::{MetricsReport, NarxMetrics, RepeatReport};
