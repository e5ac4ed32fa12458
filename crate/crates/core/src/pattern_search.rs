//! Bound-constrained Hooke & Jeeves pattern search with deterministic
//! multi-start.
//!
//! Step sizes are expressed as fractions of each coordinate's box width, so
//! a single configuration works for boxes of any aspect ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, S2kError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub n_starts: usize,
    /// Initial step as a fraction of the box width.
    pub initial_step: f64,
    pub step_shrink: f64,
    /// Termination step as a fraction of the box width.
    pub min_step: f64,
    /// Evaluation budget per start.
    pub max_evaluations: usize,
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl SearchConfig {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        SearchConfig {
            n_starts: 6,
            initial_step: 0.25,
            step_shrink: 0.5,
            min_step: 1e-4,
            max_evaluations: 2000,
            bounds,
            seed: 0,
        }
    }

    pub fn with_bounds(&self, bounds: Vec<(f64, f64)>) -> Self {
        SearchConfig {
            bounds,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(S2kError::invalid("search bounds are empty"));
        }
        if self.bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return Err(S2kError::invalid("every bound needs finite lo < hi"));
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return Err(S2kError::invalid("step_shrink must lie in (0, 1)"));
        }
        if !(self.min_step > 0.0 && self.min_step < self.initial_step) {
            return Err(S2kError::invalid("need 0 < min_step < initial_step"));
        }
        if self.n_starts == 0 || self.max_evaluations == 0 {
            return Err(S2kError::invalid("n_starts and max_evaluations must be positive"));
        }
        Ok(())
    }

    fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig::new(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub evaluations_used: usize,
    pub start_index_of_best: usize,
}

struct Probe<'a, F> {
    objective: &'a F,
    bounds: &'a [(f64, f64)],
    evaluations: usize,
}

impl<F: Fn(&[f64]) -> f64> Probe<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.objective)(x);
        // NaN is treated as a rejected point
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn clamp(&self, i: usize, v: f64) -> f64 {
        let (lo, hi) = self.bounds[i];
        v.clamp(lo, hi)
    }

    /// One exploratory sweep around `base`: per coordinate try `+step` then
    /// `-step`, keeping the first strict improvement.
    fn explore(&mut self, base: &[f64], f_base: f64, step: &[f64]) -> (Vec<f64>, f64) {
        let mut x = base.to_vec();
        let mut fx = f_base;
        for i in 0..x.len() {
            let orig = x[i];
            for dir in [1.0, -1.0] {
                let cand = self.clamp(i, orig + dir * step[i]);
                if cand == orig {
                    continue;
                }
                x[i] = cand;
                let fc = self.eval(&x);
                if fc < fx {
                    fx = fc;
                    break;
                }
                x[i] = orig;
            }
        }
        (x, fx)
    }
}

/// Single-start Hooke & Jeeves from `start`.
pub fn hooke_jeeves<F>(objective: &F, start: &[f64], config: &SearchConfig) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> f64,
{
    config.validate()?;
    let dim = config.bounds.len();
    if start.len() != dim {
        return Err(S2kError::invalid("start dimension does not match bounds"));
    }
    if start
        .iter()
        .zip(&config.bounds)
        .any(|(x, (lo, hi))| !(x >= lo && x <= hi))
    {
        return Err(S2kError::invalid("start lies outside the bounds"));
    }
    let widths: Vec<f64> = config.bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let mut step: Vec<f64> = widths.iter().map(|w| w * config.initial_step).collect();
    let min_step: Vec<f64> = widths.iter().map(|w| w * config.min_step).collect();

    let mut probe = Probe {
        objective,
        bounds: &config.bounds,
        evaluations: 0,
    };
    let mut base = start.to_vec();
    let mut f_base = probe.eval(&base);

    while probe.evaluations < config.max_evaluations {
        let (x, fx) = probe.explore(&base, f_base, &step);
        if fx < f_base {
            // pattern moves: keep extrapolating the successful displacement
            let mut prev = base;
            base = x;
            f_base = fx;
            while probe.evaluations < config.max_evaluations {
                let pattern: Vec<f64> = (0..dim)
                    .map(|i| probe.clamp(i, 2.0 * base[i] - prev[i]))
                    .collect();
                let f_pattern = probe.eval(&pattern);
                let (y, fy) = probe.explore(&pattern, f_pattern, &step);
                if fy < f_base {
                    prev = std::mem::replace(&mut base, y);
                    f_base = fy;
                } else {
                    break;
                }
            }
        } else {
            for s in step.iter_mut() {
                *s *= config.step_shrink;
            }
            if step.iter().zip(&min_step).all(|(s, m)| s < m) {
                break;
            }
        }
    }

    if !f_base.is_finite() {
        return Err(S2kError::RejectedStart);
    }
    Ok(SearchResult {
        best_point: base,
        best_value: f_base,
        evaluations_used: probe.evaluations,
        start_index_of_best: 0,
    })
}

/// Starting points: the supplied `seeds` first, then the box center, then
/// uniform draws from a ChaCha stream keyed by `config.seed`.
pub fn start_points(config: &SearchConfig, seeds: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut starts: Vec<Vec<f64>> = seeds.iter().take(config.n_starts).cloned().collect();
    if starts.len() < config.n_starts {
        starts.push(config.center());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    while starts.len() < config.n_starts {
        starts.push(
            config
                .bounds
                .iter()
                .map(|(lo, hi)| rng.random_range(*lo..*hi))
                .collect(),
        );
    }
    starts
}

/// Runs Hooke & Jeeves from every start and returns the best result
/// (ties go to the lowest start index).
pub fn multi_start<F>(objective: &F, config: &SearchConfig) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    multi_start_from(objective, config, &[])
}

/// Like [`multi_start`], with caller-supplied points used as the first starts.
pub fn multi_start_from<F>(
    objective: &F,
    config: &SearchConfig,
    seeds: &[Vec<f64>],
) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    let starts = start_points(config, seeds);
    let runs: Vec<Result<SearchResult>> = starts
        .par_iter()
        .map(|s| hooke_jeeves(objective, s, config))
        .collect();

    let mut total = 0;
    let mut best: Option<SearchResult> = None;
    for (k, run) in runs.into_iter().enumerate() {
        match run {
            Ok(mut r) => {
                total += r.evaluations_used;
                if best.as_ref().is_none_or(|b| r.best_value < b.best_value) {
                    r.start_index_of_best = k;
                    best = Some(r);
                }
            }
            Err(S2kError::RejectedStart) => {}
            Err(e) => return Err(e),
        }
    }
    match best {
        Some(mut b) => {
            b.evaluations_used = total;
            Ok(b)
        }
        None => Err(S2kError::UnfittableData(
            "objective is infinite at every start".into(),
        )),
    }
}
