//! Sequential enrichment of a sparse Kriging model for one output component.
//!
//! Starting from an equidistant subset of the pool, the row with the largest
//! acquisition `L = (m − y)² + s²` is added until `max L / σ_y² < δ`.
//!
//! Between hyper-parameter refits the engine updates everything
//! incrementally. With `L` the Cholesky factor of the selected correlation
//! matrix it keeps `V = L⁻¹ R_sp` (selected × pool), `a = L⁻¹1`, `b = L⁻¹y`
//! and the per-pool-row sums `Σ V²`, `Σ V a`, `Σ V b`, so that scoring the
//! whole pool costs `O(N)` and adding a point costs `O(N_s N)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, S2kError};
use crate::kriging::{
    matern52_from_distance, optimize_theta, profile_from_whitened, scaled_sq_distance, KrigingConfig, KrigingModel,
    Standardizer, NUGGET_MAX,
};
use crate::linalg::{dot, PackedCholesky, RowMatrix};
use crate::pool::TrainingPool;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveLearningConfig {
    /// Convergence threshold on `max L / σ_y²`.
    pub delta: f64,
    pub n_initial: usize,
    /// Cap on the number of selected rows; `None` means `min(1000, N)`.
    pub max_selected: Option<usize>,
    /// Re-optimize `θ` after this many enrichments.
    pub refit_every: usize,
    /// Pattern-search starts on refits; the previous `θ` is always the first.
    pub refit_starts: usize,
    /// Stop re-optimizing `θ` once this many rows are selected.
    pub max_refit_size: Option<usize>,
    pub kriging: KrigingConfig,
}

impl Default for ActiveLearningConfig {
    fn default() -> Self {
        ActiveLearningConfig {
            delta: 1e-6,
            n_initial: 5,
            max_selected: None,
            refit_every: 1,
            refit_starts: 2,
            max_refit_size: None,
            kriging: KrigingConfig::default(),
        }
    }
}

pub const DEFAULT_MAX_SELECTED: usize = 1000;

impl ActiveLearningConfig {
    pub fn with_delta(delta: f64) -> Self {
        ActiveLearningConfig {
            delta,
            ..Default::default()
        }
    }

    /// Refit cadence of the documented fast mode.
    pub fn fast(mut self) -> Self {
        self.refit_every = 10;
        self
    }

    pub fn cap(&self, pool_len: usize) -> usize {
        self.max_selected.unwrap_or(DEFAULT_MAX_SELECTED.min(pool_len))
    }

    pub fn validate(&self, pool_len: usize) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(S2kError::invalid("delta must be positive"));
        }
        if self.n_initial < 2 {
            return Err(S2kError::invalid("n_initial must be at least 2"));
        }
        if self.n_initial > pool_len {
            return Err(S2kError::invalid("n_initial exceeds the pool size"));
        }
        let cap = self.cap(pool_len);
        if cap > pool_len || cap < self.n_initial {
            return Err(S2kError::invalid("max_selected must lie in [n_initial, pool size]"));
        }
        if self.refit_every == 0 || self.refit_starts == 0 {
            return Err(S2kError::invalid("refit_every and refit_starts must be positive"));
        }
        if !(self.kriging.nugget > 0.0 && self.kriging.nugget <= NUGGET_MAX) {
            return Err(S2kError::invalid("nugget must lie in (0, NUGGET_MAX]"));
        }
        self.kriging.search_for(1).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub component: usize,
    /// Pool rows in the order they were selected.
    pub selected_indices: Vec<usize>,
    /// `max L / σ_y²` over the pool before each enrichment decision.
    pub acquisition_history: Vec<f64>,
    pub final_max_acquisition: f64,
    pub converged: bool,
    pub refits: usize,
    pub nugget: f64,
    /// Population variance of the component over the pool.
    pub output_variance: f64,
}

impl SelectionTrace {
    pub fn sample_size(&self) -> usize {
        self.selected_indices.len()
    }
}

/// `n_initial` indices spread evenly over `0..n`, first and last included.
pub fn select_initial(n: usize, n_initial: usize) -> Result<Vec<usize>> {
    if n_initial == 0 || n_initial > n {
        return Err(S2kError::invalid(format!("cannot pick {n_initial} initial rows from {n}")));
    }
    if n_initial == 1 {
        return Ok(vec![0]);
    }
    let mut idx: Vec<usize> = (0..n_initial)
        .map(|k| (k as f64 * (n - 1) as f64 / (n_initial - 1) as f64).round() as usize)
        .collect();
    idx.dedup();
    Ok(idx)
}

/// Acquisition `(m − y)² + s²` of `model` at every pool row, in physical
/// units squared.
pub fn acquisition(model: &KrigingModel, pool: &TrainingPool, component: usize) -> Result<Vec<f64>> {
    if component >= pool.state_dim() {
        return Err(S2kError::invalid("component index out of range"));
    }
    (0..pool.len())
        .into_par_iter()
        .map(|j| {
            let (m, v) = model.predict(pool.inputs.row(j))?;
            let r = m - pool.outputs.get(j, component);
            Ok(r * r + v)
        })
        .collect()
}

fn population_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

struct Engine<'a> {
    z: &'a RowMatrix,
    y: &'a [f64],
    theta: Vec<f64>,
    nugget: f64,
    selected: Vec<usize>,
    factor: PackedCholesky,
    v: Vec<Vec<f64>>,
    a: Vec<f64>,
    b: Vec<f64>,
    rr: Vec<f64>,
    fr: Vec<f64>,
    vb: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn new(z: &'a RowMatrix, y: &'a [f64]) -> Self {
        let n = z.nrows();
        Engine {
            z,
            y,
            theta: Vec::new(),
            nugget: 0.0,
            selected: Vec::new(),
            factor: PackedCholesky::empty(),
            v: Vec::new(),
            a: Vec::new(),
            b: Vec::new(),
            rr: vec![0.0; n],
            fr: vec![0.0; n],
            vb: vec![0.0; n],
        }
    }

    fn kernel(&self, p: usize, q: usize) -> f64 {
        if p == q {
            return 1.0;
        }
        matern52_from_distance(scaled_sq_distance(self.z.row(p), self.z.row(q), &self.theta).sqrt())
    }

    fn reset(&mut self, theta: Vec<f64>, nugget: f64) {
        self.theta = theta;
        self.nugget = nugget;
        self.selected.clear();
        self.factor = PackedCholesky::empty();
        self.v.clear();
        self.a.clear();
        self.b.clear();
        self.rr.iter_mut().for_each(|x| *x = 0.0);
        self.fr.iter_mut().for_each(|x| *x = 0.0);
        self.vb.iter_mut().for_each(|x| *x = 0.0);
    }

    /// Adds pool row `p` to the factor; `false` if the pivot collapses.
    fn try_append(&mut self, p: usize) -> bool {
        let coupling: Vec<f64> = self.selected.iter().map(|&s| self.kernel(p, s)).collect();
        if !self.factor.append(&coupling, 1.0 + self.nugget) {
            return false;
        }
        let k = self.selected.len();
        let l = self.factor.row(k);
        let (l_off, l_nn) = (&l[..k], l[k]);
        let n = self.z.nrows();
        // Row p of R + ν·I, so selected rows score their exact interpolant.
        let mut row: Vec<f64> = (0..n)
            .map(|j| if j == p { 1.0 + self.nugget } else { self.kernel(p, j) })
            .collect();
        for (lm, vm) in l_off.iter().zip(&self.v) {
            if *lm != 0.0 {
                for (r, x) in row.iter_mut().zip(vm) {
                    *r -= lm * x;
                }
            }
        }
        for r in row.iter_mut() {
            *r /= l_nn;
        }
        let a_new = (1.0 - dot(l_off, &self.a)) / l_nn;
        let b_new = (self.y[p] - dot(l_off, &self.b)) / l_nn;
        for (j, r) in row.iter().enumerate() {
            self.rr[j] += r * r;
            self.fr[j] += r * a_new;
            self.vb[j] += r * b_new;
        }
        self.v.push(row);
        self.a.push(a_new);
        self.b.push(b_new);
        self.selected.push(p);
        true
    }

    /// Factorizes `rows` from scratch for `theta`, escalating the nugget
    /// from `nugget` as needed.
    fn rebuild(&mut self, theta: Vec<f64>, rows: &[usize], nugget: f64) -> Result<()> {
        let mut nu = nugget;
        loop {
            self.reset(theta.clone(), nu);
            if rows.iter().all(|&p| self.try_append(p)) {
                return Ok(());
            }
            if nu >= NUGGET_MAX {
                return Err(S2kError::IllConditionedKernel { nugget: nu });
            }
            nu = (nu * 10.0).min(NUGGET_MAX);
        }
    }

    fn add(&mut self, p: usize) -> Result<()> {
        if self.try_append(p) {
            return Ok(());
        }
        let mut rows = self.selected.clone();
        rows.push(p);
        let nu = (self.nugget * 10.0).min(NUGGET_MAX);
        if self.nugget >= NUGGET_MAX {
            return Err(S2kError::IllConditionedKernel { nugget: self.nugget });
        }
        self.rebuild(self.theta.clone(), &rows, nu)
    }

    /// Acquisition at every pool row in standardized units.
    fn scores(&self) -> Vec<f64> {
        let (beta, sigma2) = profile_from_whitened(&self.a, &self.b);
        let aa = dot(&self.a, &self.a);
        (0..self.z.nrows())
            .map(|j| {
                let u = 1.0 - self.fr[j];
                let mean = beta * u + self.vb[j];
                let var = (sigma2 * (1.0 - self.rr[j] + u * u / aa)).max(0.0);
                let r = mean - self.y[j];
                r * r + var
            })
            .collect()
    }
}

/// Runs the enrichment loop for output `component` of `pool`.
pub fn run_component(
    pool: &TrainingPool,
    component: usize,
    config: &ActiveLearningConfig,
) -> Result<(KrigingModel, SelectionTrace)> {
    pool.validate()?;
    config.validate(pool.len())?;
    if component >= pool.state_dim() {
        return Err(S2kError::invalid("component index out of range"));
    }
    let outputs = pool.outputs.column(component);
    let standardizer = Standardizer::fit(&pool.inputs, &outputs)?;
    let z = standardizer.inputs(&pool.inputs);
    run_standardized(pool, component, &outputs, standardizer, &z, config)
}

fn run_standardized(
    pool: &TrainingPool,
    component: usize,
    outputs: &[f64],
    standardizer: Standardizer,
    z: &RowMatrix,
    config: &ActiveLearningConfig,
) -> Result<(KrigingModel, SelectionTrace)> {
    let n = pool.len();
    let y: Vec<f64> = outputs.iter().map(|v| standardizer.output(*v)).collect();
    let output_variance = population_variance(outputs);
    let scale2 = standardizer.output_scale * standardizer.output_scale;
    let normalizer = output_variance.max(f64::MIN_POSITIVE);
    let cap = config.cap(n);

    let initial = select_initial(n, config.n_initial)?;
    let mut refit_config = config.kriging.clone();
    refit_config.search.n_starts = config.refit_starts;

    let fit_theta = |rows: &[usize], kcfg: &KrigingConfig, warm: Option<&[f64]>| -> Result<Vec<f64>> {
        let zs = z.select_rows(rows);
        let ys: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
        optimize_theta(&zs, &ys, kcfg, warm)
    };

    let mut engine = Engine::new(z, &y);
    let theta = fit_theta(&initial, &config.kriging, None)?;
    engine.rebuild(theta, &initial, config.kriging.nugget)?;
    let mut is_selected = vec![false; n];
    initial.iter().for_each(|&i| is_selected[i] = true);

    let mut history = Vec::new();
    let mut refits = 1;
    let mut since_refit = 0;
    let converged = loop {
        let scores = engine.scores();
        let max_all = scores.iter().fold(0.0f64, |m, s| m.max(*s));
        let normalized = max_all * scale2 / normalizer;
        history.push(normalized);
        if normalized < config.delta {
            break true;
        }
        if engine.selected.len() >= cap {
            break false;
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, s) in scores.iter().enumerate() {
            if !is_selected[j] && best.is_none_or(|(_, b)| *s > b) {
                best = Some((j, *s));
            }
        }
        let Some((next, _)) = best else {
            break false;
        };
        is_selected[next] = true;
        since_refit += 1;
        let may_refit = config.max_refit_size.is_none_or(|m| engine.selected.len() < m);
        if may_refit && since_refit >= config.refit_every {
            let mut rows = engine.selected.clone();
            rows.push(next);
            let warm = engine.theta.clone();
            let theta = fit_theta(&rows, &refit_config, Some(&warm))?;
            engine.rebuild(theta, &rows, config.kriging.nugget)?;
            refits += 1;
            since_refit = 0;
        } else {
            engine.add(next)?;
        }
    };

    let selected = engine.selected.clone();
    let retained_inputs = pool.inputs.select_rows(&selected);
    let retained_outputs: Vec<f64> = selected.iter().map(|&r| outputs[r]).collect();
    let retained_std = z.select_rows(&selected);
    let nugget = engine.nugget;
    let theta = engine.theta.clone();
    let model = KrigingModel::from_factor(
        retained_inputs,
        retained_outputs,
        retained_std,
        standardizer,
        theta,
        nugget,
        engine.factor,
    );
    let trace = SelectionTrace {
        component,
        selected_indices: selected,
        final_max_acquisition: *history.last().unwrap_or(&f64::INFINITY),
        acquisition_history: history,
        converged,
        refits,
        nugget,
        output_variance,
    };
    Ok((model, trace))
}

/// Trains every output component; components run concurrently.
pub fn run_all(pool: &TrainingPool, configs: &[ActiveLearningConfig]) -> Result<Vec<(KrigingModel, SelectionTrace)>> {
    if configs.len() != pool.state_dim() {
        return Err(S2kError::invalid("need one active-learning config per state component"));
    }
    (0..pool.state_dim())
        .into_par_iter()
        .map(|c| run_component(pool, c, &configs[c]))
        .collect()
}
