//! Polynomial NARX baseline.
//!
//! The response `x(t_j)` is regressed on the lag window
//! `[u(t_j), …, u(t_{j−n_u}), x(t_{j−1}), …, x(t_{j−n_x})]` through a
//! full monomial basis of bounded total degree. Least-angle regression
//! orders the terms; the path is cut where the leave-one-out error of the
//! least-squares refit is smallest. Prediction runs the model recursively
//! on its own outputs.

use serde::{Deserialize, Serialize};

use crate::benchmarks::Benchmark;
use crate::error::{Result, S2kError};
use crate::linalg::{dot, PackedCholesky, RowMatrix};

/// Lag orders and basis size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarxConfig {
    pub n_u: usize,
    pub n_x: usize,
    pub max_degree: u32,
    /// Cap on non-constant terms along the path; `None` for no cap.
    pub max_terms: Option<usize>,
    /// Cut the path at the leave-one-out minimum. When `false` every term on
    /// the path is kept.
    pub loo_truncation: bool,
}

impl NarxConfig {
    pub fn new(n_u: usize, n_x: usize, max_degree: u32) -> Self {
        NarxConfig {
            n_u,
            n_x,
            max_degree,
            max_terms: None,
            loo_truncation: true,
        }
    }

    /// Lags of twice the number of mechanical degrees of freedom.
    pub fn for_benchmark(b: Benchmark) -> Self {
        let lag = 2 * b.degrees_of_freedom();
        NarxConfig::new(lag, lag, b.narx_degree() as u32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_u == 0 || self.n_x == 0 || self.max_degree == 0 {
            return Err(S2kError::invalid("lags and degree must be at least 1"));
        }
        Ok(())
    }

    /// Number of regressors in one lag window.
    pub fn width(&self) -> usize {
        self.n_u + 1 + self.n_x
    }

    /// Index of the first row with a complete lag window.
    pub fn first_row(&self) -> usize {
        self.n_u.max(self.n_x) + 1
    }

    fn window_into(&self, u: &[f64], x: &[f64], j: usize, out: &mut [f64]) {
        for k in 0..=self.n_u {
            out[k] = u[j - k];
        }
        for k in 1..=self.n_x {
            out[self.n_u + k] = x[j - k];
        }
    }
}

/// Lag-window design matrix and one-step targets for a single history.
pub fn build_regressors(u: &[f64], x: &[f64], config: &NarxConfig) -> Result<(RowMatrix, Vec<f64>)> {
    config.validate()?;
    if u.len() != x.len() {
        return Err(S2kError::invalid("excitation and response histories differ in length"));
    }
    let start = config.first_row();
    if x.len() <= start {
        return Err(S2kError::invalid(format!(
            "history of length {} is too short for lags ({}, {})",
            x.len(),
            config.n_u,
            config.n_x
        )));
    }
    let mut design = RowMatrix::zeros(x.len() - start, config.width());
    for j in start..x.len() {
        config.window_into(u, x, j, design.row_mut(j - start));
    }
    Ok((design, x[start..].to_vec()))
}

/// All exponent vectors over `dim` variables with total degree at most
/// `degree`, ordered by degree, constant first.
pub fn monomial_basis(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    fn fill(prefix: &mut Vec<u32>, dim: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == dim {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            fill(prefix, dim, remaining - e, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for d in 0..=degree {
        if dim == 0 {
            break;
        }
        fill(&mut Vec::with_capacity(dim), dim, d, &mut out);
    }
    out
}

fn eval_monomial(exponents: &[u32], w: &[f64]) -> f64 {
    exponents
        .iter()
        .zip(w)
        .filter(|(e, _)| **e > 0)
        .map(|(&e, &v)| v.powi(e as i32))
        .product()
}

/// A fitted polynomial NARX model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarxModel {
    pub config: NarxConfig,
    /// Retained terms, constant first.
    pub terms: Vec<Vec<u32>>,
    pub coefficients: Vec<f64>,
    /// Basis indices in order of entry along the regression path.
    pub path: Vec<usize>,
    /// Leave-one-out error after `k` path terms, `k = 0..=path.len()`.
    pub loo: Vec<f64>,
    /// Terms dropped because they were collinear with earlier ones.
    pub warnings: Vec<String>,
    /// `(min, max)` of the training response.
    pub response_range: (f64, f64),
}

/// Regression over the monomial expansion of `design`. Terms enter in
/// least-angle order; coefficients are least squares on the retained set.
pub fn fit_lars(
    design: &RowMatrix,
    targets: &[f64],
    max_degree: u32,
    max_terms: Option<usize>,
    loo_truncation: bool,
) -> Result<NarxFit> {
    let n = design.nrows();
    if n < 2 || targets.len() != n {
        return Err(S2kError::invalid("regression needs at least two rows and one target per row"));
    }
    if !design.all_finite() || !targets.iter().all(|v| v.is_finite()) {
        return Err(S2kError::invalid("regression data are not finite"));
    }
    let basis = monomial_basis(design.ncols(), max_degree);
    let columns: Vec<Vec<f64>> = basis[1..]
        .iter()
        .map(|e| design.rows_iter().map(|w| eval_monomial(e, w)).collect())
        .collect();
    let mut warnings = Vec::new();
    let order = lars_order(&columns, targets, max_terms.unwrap_or(usize::MAX), &mut warnings);
    let ols = IncrementalLeastSquares::run(&columns, targets, &order, &mut warnings);
    let k = if loo_truncation {
        (0..ols.loo.len()).min_by(|&a, &b| ols.loo[a].total_cmp(&ols.loo[b])).unwrap_or(0)
    } else {
        ols.loo.len() - 1
    };
    let coefficients = ols.coefficients(k);
    let mut terms = vec![basis[0].clone()];
    terms.extend(ols.accepted[..k].iter().map(|&c| basis[c + 1].clone()));
    Ok(NarxFit {
        terms,
        coefficients,
        path: ols.accepted.iter().map(|&c| c + 1).collect(),
        loo: ols.loo,
        warnings,
    })
}

/// Output of [`fit_lars`].
#[derive(Debug, Clone, PartialEq)]
pub struct NarxFit {
    pub terms: Vec<Vec<u32>>,
    pub coefficients: Vec<f64>,
    pub path: Vec<usize>,
    pub loo: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Least-angle regression on centred, unit-norm columns. Returns column
/// indices in order of entry.
fn lars_order(columns: &[Vec<f64>], y: &[f64], max_terms: usize, warnings: &mut Vec<String>) -> Vec<usize> {
    let p = columns.len();
    let n = y.len();
    let mut std_cols: Vec<Option<Vec<f64>>> = columns
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let m = c.iter().sum::<f64>() / n as f64;
            let centred: Vec<f64> = c.iter().map(|v| v - m).collect();
            let norm = dot(&centred, &centred).sqrt();
            let scale = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if !(norm > 1e-12 * scale * (n as f64).sqrt()) || norm == 0.0 {
                warnings.push(format!("basis term {} is constant on the data and was skipped", j + 1));
                None
            } else {
                Some(centred.into_iter().map(|v| v / norm).collect())
            }
        })
        .collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut residual: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let mut corr: Vec<f64> = std_cols
        .iter()
        .map(|c| c.as_ref().map_or(0.0, |c| dot(c, &residual)))
        .collect();
    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let mut chol = PackedCholesky::empty();
    let tiny = 1e-12 * dot(&residual, &residual).sqrt().max(f64::MIN_POSITIVE);
    let limit = max_terms.min(p).min(n.saturating_sub(1));

    let candidate = |std_cols: &[Option<Vec<f64>>], corr: &[f64], active: &[usize]| {
        (0..p)
            .filter(|j| std_cols[*j].is_some() && !active.contains(j))
            .max_by(|&a, &b| corr[a].abs().total_cmp(&corr[b].abs()))
    };
    let mut next = candidate(&std_cols, &corr, &active);
    while active.len() < limit {
        let Some(j) = next else { break };
        if corr[j].abs() <= tiny {
            break;
        }
        let xj = std_cols[j].as_ref().expect("candidate columns are present");
        let coupling: Vec<f64> = active
            .iter()
            .map(|&a| dot(std_cols[a].as_ref().expect("active columns are present"), xj))
            .collect();
        let l = chol.forward_solve(&coupling);
        if 1.0 - dot(&l, &l) < 1e-10 || !chol.append(&coupling, 1.0) {
            warnings.push(format!("basis term {} is collinear with the active set and was skipped", j + 1));
            std_cols[j] = None;
            next = candidate(&std_cols, &corr, &active);
            continue;
        }
        active.push(j);
        signs.push(corr[j].signum());
        let c_max = corr[j].abs();

        // Equiangular direction.
        let v = chol.solve(&signs);
        let a_norm = 1.0 / dot(&signs, &v).sqrt();
        let mut dir = vec![0.0; n];
        for (&a, &va) in active.iter().zip(&v) {
            let col = std_cols[a].as_ref().expect("active columns are present");
            for (d, c) in dir.iter_mut().zip(col) {
                *d += a_norm * va * c;
            }
        }
        let along: Vec<f64> = std_cols
            .iter()
            .map(|c| c.as_ref().map_or(0.0, |c| dot(c, &dir)))
            .collect();
        let mut gamma = c_max / a_norm;
        let mut entering = None;
        for k in 0..p {
            if std_cols[k].is_none() || active.contains(&k) {
                continue;
            }
            for g in [(c_max - corr[k]) / (a_norm - along[k]), (c_max + corr[k]) / (a_norm + along[k])] {
                if g > 1e-15 && g < gamma {
                    gamma = g;
                    entering = Some(k);
                }
            }
        }
        for (r, d) in residual.iter_mut().zip(&dir) {
            *r -= gamma * d;
        }
        for (c, a) in corr.iter_mut().zip(&along) {
            *c -= gamma * a;
        }
        next = entering.or_else(|| candidate(&std_cols, &corr, &active));
    }
    active
}

/// Least squares on a growing column set by twice-iterated Gram-Schmidt,
/// tracking hat-matrix diagonals for leave-one-out errors.
struct IncrementalLeastSquares {
    /// Column indices that survived the rank check, in entry order.
    accepted: Vec<usize>,
    /// Upper-triangular `R` of `[1, scaled columns] = Q R`, stored by column.
    r: Vec<Vec<f64>>,
    /// `Qᵀ y`.
    qty: Vec<f64>,
    /// Norm of each raw column, to undo the scaling.
    scales: Vec<f64>,
    loo: Vec<f64>,
}

impl IncrementalLeastSquares {
    fn run(columns: &[Vec<f64>], y: &[f64], order: &[usize], warnings: &mut Vec<String>) -> Self {
        let n = y.len();
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(order.len() + 1);
        let q0 = vec![1.0 / (n as f64).sqrt(); n];
        let c0 = dot(&q0, y);
        let mut fitted: Vec<f64> = q0.iter().map(|v| v * c0).collect();
        let mut hat: Vec<f64> = vec![1.0 / n as f64; n];
        let mut out = IncrementalLeastSquares {
            accepted: Vec::new(),
            r: vec![vec![(n as f64).sqrt()]],
            qty: vec![c0],
            scales: vec![1.0],
            loo: Vec::with_capacity(order.len() + 1),
        };
        q.push(q0);
        out.loo.push(loo_error(y, &fitted, &hat));
        for &c in order {
            let scale = dot(&columns[c], &columns[c]).sqrt();
            let mut v: Vec<f64> = columns[c].iter().map(|x| x / scale).collect();
            let mut rcol = vec![0.0; q.len() + 1];
            for _ in 0..2 {
                for (i, qi) in q.iter().enumerate() {
                    let h = dot(qi, &v);
                    rcol[i] += h;
                    for (vk, qk) in v.iter_mut().zip(qi) {
                        *vk -= h * qk;
                    }
                }
            }
            let norm = dot(&v, &v).sqrt();
            if !(norm > 1e-8) {
                warnings.push(format!("basis term {} is rank deficient in the refit and was dropped", c + 1));
                continue;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            rcol[q.len()] = norm;
            let coef = dot(&v, y);
            for ((f, h), qk) in fitted.iter_mut().zip(hat.iter_mut()).zip(&v) {
                *f += coef * qk;
                *h += qk * qk;
            }
            q.push(v);
            out.r.push(rcol);
            out.qty.push(coef);
            out.scales.push(scale);
            out.accepted.push(c);
            out.loo.push(loo_error(y, &fitted, &hat));
        }
        out
    }

    /// Coefficients of the constant and the first `k` accepted raw columns.
    fn coefficients(&self, k: usize) -> Vec<f64> {
        let m = k + 1;
        let mut beta = self.qty[..m].to_vec();
        for i in (0..m).rev() {
            beta[i] /= self.r[i][i];
            for row in 0..i {
                beta[row] -= self.r[i][row] * beta[i];
            }
        }
        beta.iter().zip(&self.scales).map(|(b, s)| b / s).collect()
    }
}

fn loo_error(y: &[f64], fitted: &[f64], hat: &[f64]) -> f64 {
    let n = y.len() as f64;
    y.iter()
        .zip(fitted)
        .zip(hat)
        .map(|((y, f), h)| {
            let d = 1.0 - h;
            if d <= 1e-12 {
                f64::INFINITY
            } else {
                ((y - f) / d).powi(2)
            }
        })
        .sum::<f64>()
        / n
}

/// A state is divergent once it exceeds this multiple of the training range.
pub const NARX_DIVERGENCE_FACTOR: f64 = 1e6;

impl NarxModel {
    /// Fits on one or more `(excitation, response)` histories; rows from all
    /// histories are stacked.
    pub fn fit(histories: &[(&[f64], &[f64])], config: &NarxConfig) -> Result<NarxModel> {
        config.validate()?;
        if histories.is_empty() {
            return Err(S2kError::invalid("at least one history is required"));
        }
        let mut design = RowMatrix::with_cols(config.width());
        let mut targets = Vec::new();
        let mut range = (f64::INFINITY, f64::NEG_INFINITY);
        for (u, x) in histories {
            let (d, t) = build_regressors(u, x, config)?;
            design.extend(&d)?;
            targets.extend(t);
            range = x.iter().fold(range, |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        }
        let fit = fit_lars(&design, &targets, config.max_degree, config.max_terms, config.loo_truncation)?;
        Ok(NarxModel {
            config: config.clone(),
            terms: fit.terms,
            coefficients: fit.coefficients,
            path: fit.path,
            loo: fit.loo,
            warnings: fit.warnings,
            response_range: range,
        })
    }

    /// One-step prediction from a lag window.
    pub fn predict_window(&self, w: &[f64]) -> f64 {
        self.terms
            .iter()
            .zip(&self.coefficients)
            .map(|(e, c)| c * eval_monomial(e, w))
            .sum()
    }

    /// Recursive prediction over the excitation `u`. The first
    /// [`NarxConfig::first_row`] responses are taken from `initial`; later
    /// lags use earlier predictions.
    pub fn free_run(&self, u: &[f64], initial: &[f64], dt: f64) -> Result<Vec<f64>> {
        let start = self.config.first_row();
        if initial.len() < start {
            return Err(S2kError::invalid(format!("free run needs {start} initial responses")));
        }
        if u.len() < start {
            return Err(S2kError::invalid("excitation is shorter than the lag window"));
        }
        let (lo, hi) = self.response_range;
        let bound = NARX_DIVERGENCE_FACTOR * (hi - lo).max(lo.abs()).max(hi.abs()).max(f64::MIN_POSITIVE);
        let mut x = Vec::with_capacity(u.len());
        x.extend_from_slice(&initial[..start]);
        let mut w = vec![0.0; self.config.width()];
        for j in start..u.len() {
            self.config.window_into(u, &x, j, &mut w);
            let next = self.predict_window(&w);
            if !(next.abs() <= bound) {
                return Err(S2kError::Divergence { t: j as f64 * dt });
            }
            x.push(next);
        }
        Ok(x)
    }
}
