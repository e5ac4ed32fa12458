use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use s2k_core::active_learning::ActiveLearningConfig;
use s2k_core::excitation::{magnification_schedule, SINGLE_HISTORY_MAGNIFICATION};
use s2k_core::{Benchmark, Result, S2kError};

/// Magnification of the training excitations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaPolicy {
    Fixed(f64),
    /// `σ_k` spread evenly over `[1, 2]`; a single history uses `1.5`.
    Mixture,
}

impl SigmaPolicy {
    pub fn schedule(&self, n_train: usize) -> Result<Vec<f64>> {
        match *self {
            SigmaPolicy::Fixed(s) if s > 0.0 && s.is_finite() => Ok(vec![s; n_train]),
            SigmaPolicy::Fixed(s) => Err(S2kError::InvalidArgument(format!("sigma must be positive, got {s}"))),
            SigmaPolicy::Mixture => magnification_schedule(n_train, SINGLE_HISTORY_MAGNIFICATION),
        }
    }
}

impl FromStr for SigmaPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "mixture" {
            return Ok(SigmaPolicy::Mixture);
        }
        s.parse::<f64>()
            .map(SigmaPolicy::Fixed)
            .map_err(|_| format!("expected a number or \"mixture\", got {s:?}"))
    }
}

impl fmt::Display for SigmaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaPolicy::Fixed(s) => write!(f, "{s}"),
            SigmaPolicy::Mixture => f.write_str("mixture"),
        }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub benchmark: Benchmark,
    pub n_train: usize,
    pub sigma: SigmaPolicy,
    /// One threshold for all components, or one per component.
    pub delta: Vec<f64>,
    pub dt: f64,
    pub duration: f64,
    pub n0: usize,
    pub seed: u64,
    pub n_test: usize,
    /// Ensemble size for Monte Carlo emulation.
    pub n_mc: usize,
    /// Re-optimize the length scales after this many enrichments.
    pub refit_every: usize,
    pub refit_starts: usize,
    /// Freeze the length scales beyond this many selected rows.
    pub max_refit_size: Option<usize>,
    pub out: Option<PathBuf>,
}

pub const DEFAULT_N_TEST: usize = 100;
pub const DEFAULT_N_MC: usize = 50;

impl ExperimentConfig {
    /// Defaults for `benchmark`: one training history (five for the
    /// two-story frame, mixture-scheduled), the benchmark's threshold, grid
    /// and magnification.
    pub fn for_benchmark(benchmark: Benchmark) -> Self {
        let (n_train, sigma) = match benchmark {
            Benchmark::QuarterCar | Benchmark::Duffing => (1, SigmaPolicy::Fixed(1.0)),
            Benchmark::BoucWen => (1, SigmaPolicy::Fixed(1.5)),
            Benchmark::TwoStory => (5, SigmaPolicy::Mixture),
        };
        let (refit_every, max_refit_size) = match benchmark {
            Benchmark::TwoStory => (10, Some(300)),
            _ => (1, None),
        };
        ExperimentConfig {
            benchmark,
            n_train,
            sigma,
            delta: vec![benchmark.default_delta()],
            dt: benchmark.default_dt(),
            duration: benchmark.default_duration(),
            n0: 5,
            seed: 0,
            n_test: DEFAULT_N_TEST,
            n_mc: DEFAULT_N_MC,
            refit_every,
            refit_starts: 2,
            max_refit_size,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.benchmark.state_dim();
        if self.n_train == 0 || self.n_test == 0 || self.n_mc == 0 {
            return Err(S2kError::InvalidArgument("n_train, n_test and n_mc must be at least 1".into()));
        }
        if self.delta.len() != 1 && self.delta.len() != n {
            return Err(S2kError::InvalidArgument(format!(
                "give one delta or {n} deltas, got {}",
                self.delta.len()
            )));
        }
        if !self.benchmark.excitation_model().supports_magnification()
            && self.sigma.schedule(self.n_train)?.iter().any(|&s| s != 1.0)
        {
            return Err(S2kError::InvalidArgument(format!(
                "{} uses a harmonic excitation; sigma must be 1",
                self.benchmark
            )));
        }
        self.sigma.schedule(self.n_train)?;
        let pool_len = self.n_train * s2k_core::benchmarks::time_grid(self.dt, self.duration)?.len();
        for cfg in self.learning_configs() {
            cfg.validate(pool_len)?;
        }
        Ok(())
    }

    pub fn deltas(&self) -> Vec<f64> {
        let n = self.benchmark.state_dim();
        if self.delta.len() == 1 {
            vec![self.delta[0]; n]
        } else {
            self.delta.clone()
        }
    }

    pub fn learning_configs(&self) -> Vec<ActiveLearningConfig> {
        self.deltas()
            .into_iter()
            .map(|delta| ActiveLearningConfig {
                delta,
                n_initial: self.n0,
                refit_every: self.refit_every,
                refit_starts: self.refit_starts,
                max_refit_size: self.max_refit_size,
                ..Default::default()
            })
            .collect()
    }
}
