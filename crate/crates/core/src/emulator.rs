//! The assembled surrogate `ẋ ≈ f̂(x, u)` and its integration.
//!
//! Component `i` of the surrogate is a Kriging model of `ẋ_i` over
//! `[x; u]`. Emulation integrates the surrogate with classical RK4 on a
//! fixed grid, either propagating predictive means or drawing a fresh
//! Gaussian sample from every component at every right-hand-side call.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::active_learning::{run_all, ActiveLearningConfig, SelectionTrace};
use crate::benchmarks::{time_grid, Trajectory};
use crate::error::{Result, S2kError};
use crate::excitation::Excitation;
use crate::integrate::Rk4;
use crate::kriging::KrigingModel;
use crate::linalg::RowMatrix;
use crate::pool::TrainingPool;
use crate::seeds::{rng_for, Stream};

/// A state is declared divergent once it exceeds this multiple of the
/// pooled range of its coordinate.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Provenance stored with a trained surrogate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub excitation_seeds: Vec<u64>,
    pub magnifications: Vec<f64>,
    pub deltas: Vec<f64>,
    pub n_initial: usize,
    pub pool_size: usize,
    pub dt: f64,
    pub duration: f64,
}

/// One Kriging model per state derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S2KModel {
    pub components: Vec<KrigingModel>,
    pub state_dim: usize,
    pub excitation_dim: usize,
    /// Pooled `(min, max)` of each state coordinate.
    pub state_ranges: Vec<(f64, f64)>,
    pub manifest: TrainingManifest,
}

/// How the surrogate right-hand side is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictionMode {
    Mean,
    /// Independent standard-normal draws per call and component, from the
    /// stream seeded with `seed`.
    Sampled { seed: u64 },
}

impl S2KModel {
    pub fn new(components: Vec<KrigingModel>, state_ranges: Vec<(f64, f64)>, manifest: TrainingManifest) -> Result<Self> {
        let n = components.len();
        if n == 0 {
            return Err(S2kError::invalid("a surrogate needs at least one component"));
        }
        if state_ranges.len() != n {
            return Err(S2kError::invalid("one state range per component is required"));
        }
        if let Some(bad) = components.iter().position(|c| c.input_dim() != n + 1) {
            return Err(S2kError::invalid(format!(
                "component {bad} has input dimension {}, expected {}",
                components[bad].input_dim(),
                n + 1
            )));
        }
        Ok(S2KModel {
            components,
            state_dim: n,
            excitation_dim: 1,
            state_ranges,
            manifest,
        })
    }

    /// Runs active learning on every component and assembles the result.
    /// `configs` holds one configuration per state component.
    pub fn train(
        pool: &TrainingPool,
        configs: &[ActiveLearningConfig],
        mut manifest: TrainingManifest,
    ) -> Result<(S2KModel, Vec<SelectionTrace>)> {
        let (components, traces): (Vec<_>, Vec<_>) = run_all(pool, configs)?.into_iter().unzip();
        manifest.deltas = configs.iter().map(|c| c.delta).collect();
        manifest.n_initial = configs.first().map_or(0, |c| c.n_initial);
        manifest.pool_size = pool.len();
        Ok((S2KModel::new(components, pool.state_ranges(), manifest)?, traces))
    }

    /// Largest admissible magnitude of each state coordinate.
    fn divergence_bounds(&self) -> Vec<f64> {
        self.state_ranges
            .iter()
            .map(|&(lo, hi)| DIVERGENCE_FACTOR * (hi - lo).max(lo.abs()).max(hi.abs()).max(f64::MIN_POSITIVE))
            .collect()
    }

    /// Evaluates `f̂(x, u)` into `out`. `rng` must be `Some` in sampled mode.
    pub fn surrogate_rhs<R: Rng + ?Sized>(
        &self,
        t: f64,
        x: &[f64],
        u: f64,
        rng: Option<&mut R>,
        out: &mut [f64],
    ) -> Result<()> {
        let n = self.state_dim;
        if x.len() != n || out.len() != n {
            return Err(S2kError::invalid(format!("state must have {n} entries")));
        }
        if !x.iter().all(|v| v.is_finite()) || !u.is_finite() {
            return Err(S2kError::Divergence { t });
        }
        let mut w = Vec::with_capacity(n + 1);
        w.extend_from_slice(x);
        w.push(u);
        match rng {
            None => {
                for (o, c) in out.iter_mut().zip(&self.components) {
                    *o = c.predict_mean(&w)?;
                }
            }
            Some(rng) => {
                for (o, c) in out.iter_mut().zip(&self.components) {
                    let (m, v) = c.predict(&w)?;
                    let z: f64 = rng.sample(StandardNormal);
                    *o = m + v.sqrt() * z;
                }
            }
        }
        Ok(())
    }

    /// Integrates the surrogate with RK4 on `t_i = i·dt` from `x0`. The
    /// excitation is evaluated at the stage times. Stored derivatives are
    /// surrogate means at the stored states.
    pub fn emulate(
        &self,
        excitation: &dyn Excitation,
        x0: &[f64],
        dt: f64,
        duration: f64,
        mode: PredictionMode,
    ) -> Result<Trajectory> {
        let n = self.state_dim;
        if x0.len() != n {
            return Err(S2kError::invalid(format!("initial state has {} entries, surrogate has {n}", x0.len())));
        }
        let bounds = self.divergence_bounds();
        let mean = |t: f64, x: &[f64], u: f64, out: &mut [f64]| self.surrogate_rhs(t, x, u, None::<&mut ChaCha8Rng>, out);
        match mode {
            PredictionMode::Mean => rk4_drive(mean, None::<fn(f64, &[f64], f64, &mut [f64]) -> Result<()>>, excitation, x0, dt, duration, &bounds),
            PredictionMode::Sampled { seed } => {
                let mut rng = rng_for(seed, Stream::Sampling, 0);
                let sampled = |t: f64, x: &[f64], u: f64, out: &mut [f64]| self.surrogate_rhs(t, x, u, Some(&mut rng), out);
                rk4_drive(mean, Some(sampled), excitation, x0, dt, duration, &bounds)
            }
        }
    }

    /// `n_mc` sampled emulations, replicate `r` seeded from `(seed, r)`.
    /// Divergent replicates are dropped and counted; more than half
    /// diverging is an error.
    pub fn ensemble(
        &self,
        excitation: &(dyn Excitation + Sync),
        x0: &[f64],
        dt: f64,
        duration: f64,
        n_mc: usize,
        seed: u64,
    ) -> Result<EnsemblePrediction> {
        use rayon::prelude::*;
        if n_mc == 0 {
            return Err(S2kError::invalid("the ensemble needs at least one replicate"));
        }
        let runs: Vec<Result<Trajectory>> = (0..n_mc)
            .into_par_iter()
            .map(|r| {
                let replicate_seed = crate::seeds::derive_seed(seed, Stream::Ensemble, r as u64);
                self.emulate(excitation, x0, dt, duration, PredictionMode::Sampled { seed: replicate_seed })
            })
            .collect();
        let mut members = Vec::with_capacity(n_mc);
        let mut times = Vec::new();
        let mut divergent = 0;
        for run in runs {
            match run {
                Ok(tr) => {
                    times = tr.times;
                    members.push(tr.states);
                }
                Err(S2kError::Divergence { .. }) => divergent += 1,
                Err(e) => return Err(e),
            }
        }
        if 2 * divergent > n_mc {
            return Err(S2kError::EnsembleFailure {
                divergent,
                total: n_mc,
            });
        }
        Ok(EnsemblePrediction::from_members(times, members, divergent))
    }
}

/// RK4 emulation of a deterministic right-hand side `f(t, x, u)`, with the
/// same stepping, excitation sampling and storage as [`S2KModel::emulate`]
/// in mean mode. Non-finite states are reported as divergence.
pub fn emulate_rhs<F>(rhs: F, excitation: &dyn Excitation, x0: &[f64], dt: f64, duration: f64) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], f64, &mut [f64]) -> Result<()>,
{
    let bounds = vec![f64::MAX; x0.len()];
    rk4_drive(rhs, None::<F>, excitation, x0, dt, duration, &bounds)
}

/// Fixed-step RK4 driver. `mean` supplies the stored derivatives; `stage`,
/// if given, replaces it for every stage evaluation. Without `stage` the
/// stored derivative doubles as the first stage.
fn rk4_drive<M, S>(
    mut mean: M,
    mut stage: Option<S>,
    excitation: &dyn Excitation,
    x0: &[f64],
    dt: f64,
    duration: f64,
    bounds: &[f64],
) -> Result<Trajectory>
where
    M: FnMut(f64, &[f64], f64, &mut [f64]) -> Result<()>,
    S: FnMut(f64, &[f64], f64, &mut [f64]) -> Result<()>,
{
    let n = x0.len();
    let times = time_grid(dt, duration)?;
    let mut states = RowMatrix::zeros(times.len(), n);
    let mut derivatives = RowMatrix::zeros(times.len(), n);
    let mut u_values = Vec::with_capacity(times.len());
    let mut x = x0.to_vec();
    let mut slope = vec![0.0; n];
    let mut rk = Rk4::new(n);
    for (j, &t) in times.iter().enumerate() {
        if x.iter().zip(bounds).any(|(v, b)| !(v.abs() <= *b)) {
            return Err(S2kError::Divergence { t });
        }
        let u = excitation.value(t);
        mean(t, &x, u, &mut slope)?;
        states.row_mut(j).copy_from_slice(&x);
        derivatives.row_mut(j).copy_from_slice(&slope);
        u_values.push(u);
        if j + 1 == times.len() {
            break;
        }
        let h = times[j + 1] - t;
        match stage.as_mut() {
            Some(f) => {
                let mut g = |s: f64, y: &[f64], dy: &mut [f64]| f(s, y, excitation.value(s), dy);
                rk.step(&mut g, t, &mut x, h, None)?;
            }
            None => {
                let mut g = |s: f64, y: &[f64], dy: &mut [f64]| mean(s, y, excitation.value(s), dy);
                rk.step(&mut g, t, &mut x, h, Some(&slope))?;
            }
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(S2kError::Divergence { t: times[j + 1] });
        }
    }
    Ok(Trajectory {
        times,
        states,
        derivatives,
        excitation: u_values,
        excitation_manifest: None,
    })
}

/// Pointwise summary of a Monte Carlo ensemble of emulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePrediction {
    pub times: Vec<f64>,
    pub mean: RowMatrix,
    /// Empirical 2.5% quantile.
    pub lower: RowMatrix,
    /// Empirical 97.5% quantile.
    pub upper: RowMatrix,
    pub n_replicates: usize,
    pub n_divergent: usize,
    /// Retained replicate states, `N_t × n` each. Not serialized.
    #[serde(skip)]
    pub members: Vec<RowMatrix>,
}

impl EnsemblePrediction {
    fn from_members(times: Vec<f64>, members: Vec<RowMatrix>, n_divergent: usize) -> Self {
        let (nt, n) = (members[0].nrows(), members[0].ncols());
        let mut mean = RowMatrix::zeros(nt, n);
        let mut lower = RowMatrix::zeros(nt, n);
        let mut upper = RowMatrix::zeros(nt, n);
        let mut column = vec![0.0; members.len()];
        for j in 0..nt {
            for c in 0..n {
                for (slot, m) in column.iter_mut().zip(&members) {
                    *slot = m.get(j, c);
                }
                mean.set(j, c, column.iter().sum::<f64>() / column.len() as f64);
                column.sort_by(f64::total_cmp);
                lower.set(j, c, crate::metrics::quantile_sorted(&column, 0.025));
                upper.set(j, c, crate::metrics::quantile_sorted(&column, 0.975));
            }
        }
        EnsemblePrediction {
            times,
            mean,
            lower,
            upper,
            n_replicates: members.len() + n_divergent,
            n_divergent,
            members,
        }
    }
}
