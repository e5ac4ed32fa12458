//! Correlation-matrix factorization and the concentrated (profile)
//! likelihood of ordinary Kriging.

use crate::error::{Result, S2kError};
use crate::linalg::{dot, PackedCholesky, RowMatrix};

use super::kernel::{matern52_from_distance, scaled_sq_distance};

/// Starting nugget added to the correlation diagonal.
pub const NUGGET_START: f64 = 1e-10;
/// Largest nugget tried before giving up on a factorization.
pub const NUGGET_MAX: f64 = 1e-4;
const NUGGET_GROWTH: f64 = 10.0;
/// Floor applied to the profiled process variance before taking its log.
pub const SIGMA2_FLOOR: f64 = 1e-300;

/// Strictly-lower-triangle table of per-coordinate squared differences
/// between points, so likelihood evaluations only pay for the weighted sum.
pub struct PairwiseSqDiffs {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl PairwiseSqDiffs {
    pub fn new(points: &RowMatrix) -> Self {
        let n = points.nrows();
        let dim = points.ncols();
        let mut data = Vec::with_capacity(n * n.saturating_sub(1) / 2 * dim);
        for i in 0..n {
            let a = points.row(i);
            for j in 0..i {
                let b = points.row(j);
                data.extend(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)));
            }
        }
        PairwiseSqDiffs { n, dim, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Factor of `R(θ) + nugget·I` without escalation.
    pub fn factor(&self, theta: &[f64], nugget: f64) -> Option<PackedCholesky> {
        let dim = self.dim;
        PackedCholesky::factor(self.n, |i, j| {
            if i == j {
                1.0 + nugget
            } else {
                let off = (i * (i - 1) / 2 + j) * dim;
                let d2 = dot(&self.data[off..off + dim], theta);
                matern52_from_distance(d2.sqrt())
            }
        })
    }
}

fn correlation_factor(inputs: &RowMatrix, theta: &[f64], nugget: f64) -> Option<PackedCholesky> {
    PackedCholesky::factor(inputs.nrows(), |i, j| {
        if i == j {
            1.0 + nugget
        } else {
            matern52_from_distance(scaled_sq_distance(inputs.row(i), inputs.row(j), theta).sqrt())
        }
    })
}

/// Factorizes `R + nugget·I`, multiplying the nugget by ten after each
/// failure up to [`NUGGET_MAX`]. Returns the factor and the nugget that
/// worked.
pub fn build_factorized_correlation(
    inputs: &RowMatrix,
    theta: &[f64],
    nugget: f64,
) -> Result<(PackedCholesky, f64)> {
    if inputs.nrows() < 2 {
        return Err(S2kError::invalid("correlation matrix needs at least two points"));
    }
    if theta.len() != inputs.ncols() || !theta.iter().all(|t| t.is_finite() && *t > 0.0) {
        return Err(S2kError::invalid("theta must be positive with one entry per input"));
    }
    if !(nugget > 0.0) {
        return Err(S2kError::invalid("nugget must be positive"));
    }
    let mut nu = nugget;
    loop {
        if let Some(l) = correlation_factor(inputs, theta, nu) {
            return Ok((l, nu));
        }
        if nu >= NUGGET_MAX {
            return Err(S2kError::IllConditionedKernel { nugget: nu });
        }
        nu = (nu * NUGGET_GROWTH).min(NUGGET_MAX);
    }
}

/// Generalized-least-squares trend `β` and process variance `σ²` given the
/// factor of the correlation matrix (constant trend basis `F = 1`).
pub fn profile_trend_and_variance(factor: &PackedCholesky, y: &[f64]) -> (f64, f64) {
    let ones = vec![1.0; factor.dim()];
    let a = factor.forward_solve(&ones);
    let b = factor.forward_solve(y);
    profile_from_whitened(&a, &b)
}

/// Same as [`profile_trend_and_variance`] with `a = L⁻¹F`, `b = L⁻¹y`
/// already available.
pub(crate) fn profile_from_whitened(a: &[f64], b: &[f64]) -> (f64, f64) {
    let ftrf = dot(a, a);
    let beta = dot(a, b) / ftrf;
    let n = a.len() as f64;
    let sigma2 = a
        .iter()
        .zip(b)
        .map(|(ai, bi)| {
            let r = bi - beta * ai;
            r * r
        })
        .sum::<f64>()
        / n;
    (beta, sigma2)
}

/// `N ln σ²(θ) + ln det R(θ)` for an existing factor.
pub fn reduced_likelihood(factor: &PackedCholesky, y: &[f64]) -> f64 {
    let (_, sigma2) = profile_trend_and_variance(factor, y);
    factor.dim() as f64 * sigma2.max(SIGMA2_FLOOR).ln() + factor.log_det()
}

/// Reduced likelihood as a function of `θ`; `+∞` when `R(θ) + nugget·I`
/// cannot be factorized.
pub fn reduced_likelihood_objective(
    diffs: &PairwiseSqDiffs,
    y: &[f64],
    theta: &[f64],
    nugget: f64,
) -> f64 {
    match diffs.factor(theta, nugget) {
        Some(l) => reduced_likelihood(&l, y),
        None => f64::INFINITY,
    }
}
