use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use s2k_core::active_learning::SelectionTrace;
use s2k_core::benchmarks::reference_trajectory;
use s2k_core::emulator::{PredictionMode, TrainingManifest};
use s2k_core::excitation::ExcitationRealization;
use s2k_core::metrics::{mean, median, relative_error};
use s2k_core::narx::{NarxConfig, NarxModel};
use s2k_core::pool::generate_training_pool;
use s2k_core::seeds::{derive_seed, Stream};
use s2k_core::{Benchmark, S2KModel, S2kError, Trajectory, TrainingPool};

use crate::config::ExperimentConfig;
use crate::report::{MetricsReport, NarxMetrics, RepeatReport, Timings};

/// Pipeline stage, used to label failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    Generate,
    Train,
    Emulate,
    Evaluate,
    Narx,
    Io,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Generate => "generate",
            Stage::Train => "train",
            Stage::Emulate => "emulate",
            Stage::Evaluate => "evaluate",
            Stage::Narx => "narx",
            Stage::Io => "io",
        }
    }

    /// Process exit code reported for a failure in this stage.
    pub fn exit_code(&self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Generate => 3,
            Stage::Train => 4,
            Stage::Emulate => 5,
            Stage::Evaluate => 6,
            Stage::Narx => 7,
            Stage::Io => 8,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    pub source: S2kError,
}

pub type StageResult<T> = std::result::Result<T, StageError>;

trait AtStage<T> {
    fn at(self, stage: Stage) -> StageResult<T>;
}

impl<T, E: Into<S2kError>> AtStage<T> for std::result::Result<T, E> {
    fn at(self, stage: Stage) -> StageResult<T> {
        self.map_err(|e| StageError {
            stage,
            source: e.into(),
        })
    }
}

/// The command a manifest replays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    Generate,
    Train,
    Evaluate,
    CompareNarx,
    Repeat { runs: usize, narx: bool },
}

/// Written next to every run; sufficient to regenerate all artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    #[serde(flatten)]
    pub command: Command,
    pub config: ExperimentConfig,
    pub training_excitations: Vec<ExcitationRealization>,
    pub test_excitations: Vec<ExcitationRealization>,
}

/// Training excitations: history `k` uses magnification `σ_k` and the
/// `k`-th training stream of the master seed.
pub fn training_excitations(config: &ExperimentConfig) -> StageResult<Vec<ExcitationRealization>> {
    let model = config.benchmark.excitation_model();
    config
        .sigma
        .schedule(config.n_train)
        .at(Stage::Config)?
        .into_iter()
        .enumerate()
        .map(|(k, s)| model.sample(s, derive_seed(config.seed, Stream::TrainExcitation, k as u64)))
        .collect::<s2k_core::Result<Vec<_>>>()
        .at(Stage::Generate)
}

/// Unmagnified test excitations from the test stream of the master seed.
pub fn test_excitations(config: &ExperimentConfig) -> StageResult<Vec<ExcitationRealization>> {
    let model = config.benchmark.excitation_model();
    (0..config.n_test)
        .map(|k| model.sample(1.0, derive_seed(config.seed, Stream::TestExcitation, k as u64)))
        .collect::<s2k_core::Result<Vec<_>>>()
        .at(Stage::Generate)
}

/// Training data of one experiment.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub excitations: Vec<ExcitationRealization>,
    pub trajectories: Vec<Trajectory>,
    pub pool: TrainingPool,
}

pub fn generate(config: &ExperimentConfig) -> StageResult<TrainingData> {
    config.validate().at(Stage::Config)?;
    let excitations = training_excitations(config)?;
    let system = config.benchmark.system();
    let (pool, trajectories) =
        generate_training_pool(system.as_ref(), &excitations, config.dt, config.duration).at(Stage::Generate)?;
    Ok(TrainingData {
        excitations,
        trajectories,
        pool,
    })
}

pub fn train(config: &ExperimentConfig, data: &TrainingData) -> StageResult<(S2KModel, Vec<SelectionTrace>)> {
    let manifest = TrainingManifest {
        excitation_seeds: data.excitations.iter().filter_map(ExcitationRealization::seed).collect(),
        magnifications: config.sigma.schedule(config.n_train).at(Stage::Config)?,
        dt: config.dt,
        duration: config.duration,
        ..Default::default()
    };
    S2KModel::train(&data.pool, &config.learning_configs(), manifest).at(Stage::Train)
}

/// Reference and emulated test histories of one experiment.
#[derive(Debug, Clone)]
pub struct TestResults {
    pub excitations: Vec<ExcitationRealization>,
    pub references: Vec<Trajectory>,
    /// `None` where the emulation diverged.
    pub emulations: Vec<Option<Trajectory>>,
    pub epsilon: Vec<Vec<f64>>,
}

/// Emulates every test history from rest in mean mode and scores it.
pub fn evaluate(config: &ExperimentConfig, model: &S2KModel) -> StageResult<TestResults> {
    let excitations = test_excitations(config)?;
    let system = config.benchmark.system();
    let x0 = vec![0.0; config.benchmark.state_dim()];
    let pairs: Vec<StageResult<(Trajectory, Option<Trajectory>)>> = excitations
        .par_iter()
        .map(|e| {
            let truth = reference_trajectory(system.as_ref(), e, &x0, config.dt, config.duration).at(Stage::Generate)?;
            match model.emulate(e, &x0, config.dt, config.duration, PredictionMode::Mean) {
                Ok(mut em) => {
                    em.excitation_manifest = Some(e.clone());
                    Ok((truth, Some(em)))
                }
                Err(S2kError::Divergence { .. }) => Ok((truth, None)),
                Err(err) => Err(err).at(Stage::Emulate),
            }
        })
        .collect();
    let mut references = Vec::with_capacity(pairs.len());
    let mut emulations = Vec::with_capacity(pairs.len());
    for p in pairs {
        let (r, e) = p?;
        references.push(r);
        emulations.push(e);
    }
    let epsilon = references
        .iter()
        .zip(&emulations)
        .map(|(r, e)| state_errors(r, e.as_ref()))
        .collect::<StageResult<Vec<_>>>()?;
    Ok(TestResults {
        excitations,
        references,
        emulations,
        epsilon,
    })
}

/// `ε_i` for every state; `+∞` when there is no prediction.
pub fn state_errors(truth: &Trajectory, prediction: Option<&Trajectory>) -> StageResult<Vec<f64>> {
    (0..truth.state_dim())
        .map(|i| match prediction {
            Some(p) => relative_error(&truth.state_series(i), &p.state_series(i)).at(Stage::Evaluate),
            None => Ok(f64::INFINITY),
        })
        .collect()
}

/// NARX fit on the first state of the training histories, free-run on the
/// test histories.
pub fn narx_metrics(
    config: &ExperimentConfig,
    data: &TrainingData,
    tests: &TestResults,
) -> StageResult<(NarxMetrics, Vec<Option<Vec<f64>>>)> {
    if config.benchmark == Benchmark::TwoStory {
        return Err(S2kError::InvalidArgument("the NARX comparison covers quarter-car, duffing and bouc-wen".into()))
            .at(Stage::Config);
    }
    let narx_config = NarxConfig::for_benchmark(config.benchmark);
    let responses: Vec<Vec<f64>> = data.trajectories.iter().map(|t| t.state_series(0)).collect();
    let histories: Vec<(&[f64], &[f64])> = data
        .trajectories
        .iter()
        .zip(&responses)
        .map(|(t, x)| (t.excitation.as_slice(), x.as_slice()))
        .collect();
    let model = NarxModel::fit(&histories, &narx_config).at(Stage::Narx)?;
    let runs: Vec<StageResult<Option<Vec<f64>>>> = tests
        .references
        .par_iter()
        .map(|r| match model.free_run(&r.excitation, &r.state_series(0), config.dt) {
            Ok(x) => Ok(Some(x)),
            Err(S2kError::Divergence { .. }) => Ok(None),
            Err(e) => Err(e).at(Stage::Narx),
        })
        .collect();
    let runs = runs.into_iter().collect::<StageResult<Vec<_>>>()?;
    let epsilon_1 = tests
        .references
        .iter()
        .zip(&runs)
        .map(|(r, p)| match p {
            Some(p) => relative_error(&r.state_series(0), p).at(Stage::Evaluate),
            None => Ok(f64::INFINITY),
        })
        .collect::<StageResult<Vec<_>>>()?;
    let divergent_tests: Vec<usize> = runs.iter().enumerate().filter(|(_, p)| p.is_none()).map(|(k, _)| k).collect();
    let finite: Vec<f64> = epsilon_1.iter().copied().filter(|e| e.is_finite()).collect();
    let metrics = NarxMetrics {
        mean_epsilon_1: if finite.is_empty() { f64::INFINITY } else { mean(&finite) },
        median_epsilon_1: median(&epsilon_1),
        epsilon_1,
        divergent_tests,
        n_terms: model.terms.len(),
        warnings: model.warnings.clone(),
    };
    Ok((metrics, runs))
}

/// Everything produced by one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub data: TrainingData,
    pub model: S2KModel,
    pub traces: Vec<SelectionTrace>,
    pub tests: TestResults,
    pub report: MetricsReport,
    pub narx_predictions: Option<Vec<Option<Vec<f64>>>>,
}

fn build_report(
    config: &ExperimentConfig,
    data: &TrainingData,
    traces: &[SelectionTrace],
    tests: &TestResults,
    timings: Timings,
) -> MetricsReport {
    let n = config.benchmark.state_dim();
    let divergent_tests: Vec<usize> = tests
        .emulations
        .iter()
        .enumerate()
        .filter(|(_, e)| e.is_none())
        .map(|(k, _)| k)
        .collect();
    let column = |i: usize| tests.epsilon.iter().map(|row| row[i]).collect::<Vec<_>>();
    let mean_epsilon = (0..n)
        .map(|i| {
            let finite: Vec<f64> = column(i).into_iter().filter(|e| e.is_finite()).collect();
            if finite.is_empty() {
                f64::INFINITY
            } else {
                mean(&finite)
            }
        })
        .collect();
    let pool_size = data.pool.len();
    MetricsReport {
        config: config.clone(),
        epsilon: tests.epsilon.clone(),
        mean_epsilon,
        median_epsilon: (0..n).map(|i| median(&column(i))).collect(),
        divergent_tests,
        pool_size,
        sample_sizes: traces.iter().map(SelectionTrace::sample_size).collect(),
        sparsity: traces.iter().map(|t| t.sample_size() as f64 / pool_size as f64).collect(),
        converged: traces.iter().map(|t| t.converged).collect(),
        timings,
        narx: None,
    }
}

fn run(config: &ExperimentConfig, with_narx: bool) -> StageResult<ExperimentOutcome> {
    let t = Instant::now();
    let data = generate(config)?;
    let generate_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let (model, traces) = train(config, &data)?;
    let train_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let tests = evaluate(config, &model)?;
    let evaluate_s = t.elapsed().as_secs_f64();
    let mut timings = Timings {
        generate_s,
        train_s,
        evaluate_s,
        narx_s: 0.0,
    };
    let mut narx_predictions = None;
    let mut narx = None;
    if with_narx {
        let t = Instant::now();
        let (m, preds) = narx_metrics(config, &data, &tests)?;
        timings.narx_s = t.elapsed().as_secs_f64();
        narx = Some(m);
        narx_predictions = Some(preds);
    }
    let mut report = build_report(config, &data, &traces, &tests, timings);
    report.narx = narx;
    let outcome = ExperimentOutcome {
        data,
        model,
        traces,
        tests,
        report,
        narx_predictions,
    };
    if let Some(dir) = &config.out {
        let command = if with_narx { Command::CompareNarx } else { Command::Evaluate };
        write_outcome(dir, &command, &outcome)?;
    }
    Ok(outcome)
}

/// Generates training data, trains the surrogate, emulates the test
/// histories and scores them. Artifacts go to `config.out` if set.
pub fn run_experiment(config: &ExperimentConfig) -> StageResult<ExperimentOutcome> {
    run(config, false)
}

/// [`run_experiment`] plus a NARX model trained and tested on the same
/// draws.
pub fn compare_narx(config: &ExperimentConfig) -> StageResult<ExperimentOutcome> {
    run(config, true)
}

/// `runs` independent experiments; run `r` uses the `r`-th repetition seed
/// of `base.seed` and writes to `base.out/run_r` if an output is set.
pub fn repeat(base: &ExperimentConfig, runs: usize, with_narx: bool) -> StageResult<RepeatReport> {
    if runs == 0 {
        return Err(S2kError::InvalidArgument("at least one run is required".into())).at(Stage::Config);
    }
    let configs: Vec<ExperimentConfig> = (0..runs)
        .map(|r| ExperimentConfig {
            seed: derive_seed(base.seed, Stream::Repetition, r as u64),
            out: base.out.as_ref().map(|d| d.join(format!("run_{r:02}"))),
            ..base.clone()
        })
        .collect();
    let reports = configs
        .par_iter()
        .map(|c| run(c, with_narx).map(|o| o.report))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<StageResult<Vec<_>>>()?;
    let report = RepeatReport {
        base: base.clone(),
        runs: reports,
    };
    if let Some(dir) = &base.out {
        fs::create_dir_all(dir).at(Stage::Io)?;
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: Command::Repeat { runs, narx: with_narx },
            config: base.clone(),
            training_excitations: Vec::new(),
            test_excitations: Vec::new(),
        };
        write_json(&dir.join("manifest.json"), &manifest)?;
        write_json(&dir.join("repeat.json"), &report)?;
    }
    Ok(report)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> StageResult<()> {
    let text = serde_json::to_string_pretty(value).at(Stage::Io)?;
    fs::write(path, text + "\n").at(Stage::Io)
}

fn write_trajectories(dir: &Path, prefix: &str, items: &[&Trajectory]) -> StageResult<()> {
    fs::create_dir_all(dir).at(Stage::Io)?;
    for (k, t) in items.iter().enumerate() {
        t.write_csv(&dir.join(format!("{prefix}_{k:03}.csv"))).at(Stage::Io)?;
    }
    Ok(())
}

/// Training histories plus the manifest of a `generate` run.
pub fn write_training_data(dir: &Path, config: &ExperimentConfig, data: &TrainingData) -> StageResult<()> {
    fs::create_dir_all(dir).at(Stage::Io)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: Command::Generate,
        config: config.clone(),
        training_excitations: data.excitations.clone(),
        test_excitations: Vec::new(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    write_trajectories(&dir.join("train"), "history", &data.trajectories.iter().collect::<Vec<_>>())
}

/// Model, selection traces, training histories and manifest of a `train`
/// run.
pub fn write_trained(
    dir: &Path,
    config: &ExperimentConfig,
    data: &TrainingData,
    model: &S2KModel,
    traces: &[SelectionTrace],
) -> StageResult<()> {
    write_training_data(dir, config, data)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: Command::Train,
        config: config.clone(),
        training_excitations: data.excitations.clone(),
        test_excitations: Vec::new(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    write_json(&dir.join("model.json"), model)?;
    write_json(&dir.join("traces.json"), &traces)
}

fn write_outcome(dir: &Path, command: &Command, o: &ExperimentOutcome) -> StageResult<()> {
    let config = &o.report.config;
    write_trained(dir, config, &o.data, &o.model, &o.traces)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.clone(),
        config: config.clone(),
        training_excitations: o.data.excitations.clone(),
        test_excitations: o.tests.excitations.clone(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    write_json(&dir.join("metrics.json"), &o.report)?;
    let test_dir = dir.join("test");
    write_trajectories(&test_dir, "reference", &o.tests.references.iter().collect::<Vec<_>>())?;
    for (k, e) in o.tests.emulations.iter().enumerate() {
        if let Some(e) = e {
            e.write_csv(&test_dir.join(format!("emulated_{k:03}.csv"))).at(Stage::Io)?;
        }
    }
    if let Some(preds) = &o.narx_predictions {
        for (k, (p, r)) in preds.iter().zip(&o.tests.references).enumerate() {
            if let Some(p) = p {
                write_series(&test_dir.join(format!("narx_{k:03}.csv")), &r.times, &r.excitation, p)?;
            }
        }
    }
    write_summary(dir, &o.report)
}

/// `t,u,x_1` table of a scalar response.
pub fn write_series(path: &Path, times: &[f64], u: &[f64], x: &[f64]) -> StageResult<()> {
    let mut text = String::from("t,u,x_1\n");
    for ((t, u), x) in times.iter().zip(u).zip(x) {
        text.push_str(&format!("{t:.16e},{u:.16e},{x:.16e}\n"));
    }
    fs::write(path, text).at(Stage::Io)
}

fn write_summary(dir: &Path, report: &MetricsReport) -> StageResult<()> {
    fs::write(dir.join("summary.txt"), report.table() + "\n").at(Stage::Io)
}

/// Reads a manifest and re-runs its command into `out`.
pub fn replay(manifest_path: &Path, out: PathBuf) -> StageResult<()> {
    let text = fs::read_to_string(manifest_path).at(Stage::Io)?;
    let manifest: Manifest = serde_json::from_str(&text).at(Stage::Config)?;
    let config = ExperimentConfig {
        out: Some(out.clone()),
        ..manifest.config
    };
    match manifest.command {
        Command::Generate => {
            let data = generate(&config)?;
            write_training_data(&out, &config, &data)
        }
        Command::Train => {
            let data = generate(&config)?;
            let (model, traces) = train(&config, &data)?;
            write_trained(&out, &config, &data, &model, &traces)
        }
        Command::Evaluate => run_experiment(&config).map(|_| ()),
        Command::CompareNarx => compare_narx(&config).map(|_| ()),
        Command::Repeat { runs, narx } => repeat(&config, runs, narx).map(|_| ()),
    }
}

/// Loads a surrogate written by `train`.
pub fn load_model(path: &Path) -> StageResult<S2KModel> {
    let text = fs::read_to_string(path).at(Stage::Io)?;
    serde_json::from_str(&text).at(Stage::Config)
}

/// Emulates the configured test histories with a saved surrogate. With
/// `n_mc > 1` an ensemble summary is written next to each mean emulation.
pub fn emulate_tests(config: &ExperimentConfig, model: &S2KModel, dir: &Path) -> StageResult<usize> {
    if model.state_dim != config.benchmark.state_dim() {
        return Err(S2kError::InvalidArgument("the model does not match the benchmark".into())).at(Stage::Config);
    }
    let excitations = test_excitations(config)?;
    let x0 = vec![0.0; model.state_dim];
    fs::create_dir_all(dir).at(Stage::Io)?;
    let mut divergent = 0;
    for (k, e) in excitations.iter().enumerate() {
        match model.emulate(e, &x0, config.dt, config.duration, PredictionMode::Mean) {
            Ok(mut tr) => {
                tr.excitation_manifest = Some(e.clone());
                tr.write_csv(&dir.join(format!("emulated_{k:03}.csv"))).at(Stage::Io)?;
            }
            Err(S2kError::Divergence { .. }) => divergent += 1,
            Err(err) => return Err(err).at(Stage::Emulate),
        }
        if config.n_mc > 1 {
            let seed = derive_seed(config.seed, Stream::Ensemble, k as u64);
            let ens = model
                .ensemble(e, &x0, config.dt, config.duration, config.n_mc, seed)
                .at(Stage::Emulate)?;
            write_json(&dir.join(format!("ensemble_{k:03}.json")), &ens)?;
        }
    }
    write_json(&dir.join("test_excitations.json"), &excitations)?;
    Ok(divergent)
}
