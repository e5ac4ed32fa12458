use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use s2k_cli::experiment::{self, load_model, Stage, StageError};
use s2k_cli::{ExperimentConfig, SigmaPolicy};
use s2k_core::{Benchmark, S2kError};

/// Sparse state-space Kriging experiments.
#[derive(Parser)]
#[command(name = "s2k", version)]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "S2K_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the training histories and write them as CSV.
    Generate(ExperimentArgs),
    /// Generate training data and fit the surrogate.
    Train(ExperimentArgs),
    /// Emulate test histories with a saved surrogate.
    Emulate {
        /// `model.json` written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        args: ExperimentArgs,
    },
    /// Train, emulate the test histories and report errors.
    Evaluate(ExperimentArgs),
    /// Evaluate S2K and a polynomial NARX model on the same draws.
    CompareNarx(ExperimentArgs),
    /// Independent repetitions of `evaluate`.
    Repeat {
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Include the NARX comparison in every run.
        #[arg(long)]
        narx: bool,
        #[command(flatten)]
        args: ExperimentArgs,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    benchmark: Benchmark,
    #[arg(long)]
    n_train: Option<usize>,
    /// Training magnification: a number or "mixture".
    #[arg(long)]
    sigma: Option<SigmaPolicy>,
    /// One threshold, or one per state separated by commas.
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    n0: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Monte Carlo ensemble size for `emulate`.
    #[arg(long)]
    nmc: Option<usize>,
    #[arg(long)]
    refit_every: Option<usize>,
    #[arg(long)]
    max_refit_size: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn config(self) -> ExperimentConfig {
        let mut c = ExperimentConfig::for_benchmark(self.benchmark);
        if let Some(v) = self.n_train {
            c.n_train = v;
        }
        if let Some(v) = self.sigma {
            c.sigma = v;
        }
        if let Some(v) = self.delta {
            c.delta = v;
        }
        if let Some(v) = self.dt {
            c.dt = v;
        }
        if let Some(v) = self.duration {
            c.duration = v;
        }
        if let Some(v) = self.n0 {
            c.n0 = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.n_test {
            c.n_test = v;
        }
        if let Some(v) = self.nmc {
            c.n_mc = v;
        }
        if let Some(v) = self.refit_every {
            c.refit_every = v;
        }
        if self.max_refit_size.is_some() {
            c.max_refit_size = self.max_refit_size;
        }
        c.out = self.out;
        c
    }
}

fn require_out(c: &ExperimentConfig) -> Result<PathBuf, StageError> {
    c.out.clone().ok_or(StageError {
        stage: Stage::Config,
        source: S2kError::InvalidArgument("--out is required for this command".into()),
    })
}

fn execute(cmd: Cmd) -> Result<(), StageError> {
    match cmd {
        Cmd::Generate(args) => {
            let c = args.config();
            let out = require_out(&c)?;
            let data = experiment::generate(&c)?;
            experiment::write_training_data(&out, &c, &data)?;
            println!("wrote {} training histories ({} pool rows) to {}", data.trajectories.len(), data.pool.len(), out.display());
        }
        Cmd::Train(args) => {
            let c = args.config();
            let out = require_out(&c)?;
            let data = experiment::generate(&c)?;
            let (model, traces) = experiment::train(&c, &data)?;
            experiment::write_trained(&out, &c, &data, &model, &traces)?;
            for t in &traces {
                println!(
                    "component {}: {} of {} rows selected, converged {}",
                    t.component + 1,
                    t.sample_size(),
                    data.pool.len(),
                    t.converged
                );
            }
        }
        Cmd::Emulate { model, args } => {
            let c = args.config();
            c.validate().map_err(|source| StageError {
                stage: Stage::Config,
                source,
            })?;
            let out = require_out(&c)?;
            let model = load_model(&model)?;
            let divergent = experiment::emulate_tests(&c, &model, &out)?;
            println!("emulated {} test histories ({divergent} divergent) into {}", c.n_test, out.display());
        }
        Cmd::Evaluate(args) => {
            let o = experiment::run_experiment(&args.config())?;
            println!("{}", o.report.table());
        }
        Cmd::CompareNarx(args) => {
            let o = experiment::compare_narx(&args.config())?;
            println!("{}", o.report.table());
        }
        Cmd::Repeat { runs, narx, args } => {
            let r = experiment::repeat(&args.config(), runs, narx)?;
            for (k, run) in r.runs.iter().enumerate() {
                let narx = run
                    .narx
                    .as_ref()
                    .map(|n| format!("  narx eps_1 {:.3e}", n.mean_epsilon_1))
                    .unwrap_or_default();
                println!("run {k:>2}: eps_1 {:.3e}  samples {:?}{narx}", run.mean_epsilon[0], run.sample_sizes);
            }
        }
        Cmd::Replay { manifest, out } => {
            experiment::replay(&manifest, out.clone())?;
            println!("replayed {} into {}", manifest.display(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: config stage failed: {e}");
            return ExitCode::from(Stage::Config.exit_code() as u8);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.stage.exit_code() as u8)
        }
    }
}
