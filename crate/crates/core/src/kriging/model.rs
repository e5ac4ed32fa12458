use serde::{Deserialize, Serialize};

use crate::error::{Result, S2kError};
use crate::linalg::{dot, PackedCholesky, RowMatrix};
use crate::pattern_search::{multi_start_from, SearchConfig};

use super::kernel::{matern52_from_distance, scaled_sq_distance};
use super::likelihood::{
    build_factorized_correlation, profile_from_whitened, reduced_likelihood_objective,
    PairwiseSqDiffs, NUGGET_START,
};
use super::standardize::Standardizer;

/// Trained hyper-parameters, in standardized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrigingHyperParams {
    /// Inverse squared length scales, one per input coordinate.
    pub theta: Vec<f64>,
    pub beta: f64,
    pub sigma2: f64,
}

/// Settings for maximum-likelihood fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrigingConfig {
    /// Pattern-search settings; the bounds are replaced by
    /// `log10_theta_bounds` in every input coordinate.
    pub search: SearchConfig,
    pub log10_theta_bounds: (f64, f64),
    pub nugget: f64,
}

impl Default for KrigingConfig {
    fn default() -> Self {
        KrigingConfig {
            search: SearchConfig::default(),
            log10_theta_bounds: (-5.0, 3.0),
            nugget: NUGGET_START,
        }
    }
}

impl KrigingConfig {
    pub(crate) fn search_for(&self, dim: usize) -> SearchConfig {
        self.search.with_bounds(vec![self.log10_theta_bounds; dim])
    }
}

/// A trained scalar Kriging predictor with constant trend.
///
/// All cached products refer to standardized coordinates; `predict_*`
/// accept and return physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KrigingModelData", into = "KrigingModelData")]
pub struct KrigingModel {
    hyper: KrigingHyperParams,
    standardizer: Standardizer,
    nugget: f64,
    retained_inputs: RowMatrix,
    retained_outputs: Vec<f64>,
    retained_std: RowMatrix,
    factor: PackedCholesky,
    /// `R⁻¹(y − βF)`
    alpha: Vec<f64>,
    /// `L⁻¹F`
    l_inv_f: Vec<f64>,
    /// `FᵀR⁻¹F`
    ftrf: f64,
}

/// Serialized form: everything else is recomputed on load.
#[derive(Serialize, Deserialize)]
struct KrigingModelData {
    theta: Vec<f64>,
    nugget: f64,
    standardizer: Standardizer,
    retained_inputs: RowMatrix,
    retained_outputs: Vec<f64>,
}

impl From<KrigingModel> for KrigingModelData {
    fn from(m: KrigingModel) -> Self {
        KrigingModelData {
            theta: m.hyper.theta,
            nugget: m.nugget,
            standardizer: m.standardizer,
            retained_inputs: m.retained_inputs,
            retained_outputs: m.retained_outputs,
        }
    }
}

impl TryFrom<KrigingModelData> for KrigingModel {
    type Error = S2kError;

    fn try_from(d: KrigingModelData) -> Result<Self> {
        KrigingModel::assemble(
            d.retained_inputs,
            d.retained_outputs,
            d.standardizer,
            &d.theta,
            d.nugget,
        )
    }
}

fn check_training_data(inputs: &RowMatrix, outputs: &[f64]) -> Result<()> {
    if inputs.nrows() != outputs.len() {
        return Err(S2kError::invalid("inputs and outputs have different row counts"));
    }
    if inputs.nrows() < 2 {
        return Err(S2kError::invalid("Kriging needs at least two training points"));
    }
    if !inputs.all_finite() || !outputs.iter().all(|v| v.is_finite()) {
        return Err(S2kError::invalid("training data contains non-finite values"));
    }
    Ok(())
}

/// Maximum-likelihood fit on `(inputs, outputs)`, standardizing over the
/// given slice.
pub fn fit(inputs: &RowMatrix, outputs: &[f64], config: &KrigingConfig) -> Result<KrigingModel> {
    check_training_data(inputs, outputs)?;
    let standardizer = Standardizer::fit(inputs, outputs)?;
    fit_with(inputs, outputs, standardizer, config, None)
}

/// Maximum-likelihood fit with an externally supplied standardizer and an
/// optional warm-start `θ` that is used as the first pattern-search start.
pub fn fit_with(
    inputs: &RowMatrix,
    outputs: &[f64],
    standardizer: Standardizer,
    config: &KrigingConfig,
    warm_theta: Option<&[f64]>,
) -> Result<KrigingModel> {
    check_training_data(inputs, outputs)?;
    if standardizer.dim() != inputs.ncols() {
        return Err(S2kError::invalid("standardizer dimension mismatch"));
    }
    let theta = optimize_theta(
        &standardizer.inputs(inputs),
        &outputs.iter().map(|y| standardizer.output(*y)).collect::<Vec<_>>(),
        config,
        warm_theta,
    )?;
    KrigingModel::assemble(
        inputs.clone(),
        outputs.to_vec(),
        standardizer,
        &theta,
        config.nugget,
    )
}

/// Minimizes the reduced likelihood over `log10 θ` for already
/// standardized data.
pub(crate) fn optimize_theta(
    z: &RowMatrix,
    y: &[f64],
    config: &KrigingConfig,
    warm_theta: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let dim = z.ncols();
    let search = config.search_for(dim);
    let diffs = PairwiseSqDiffs::new(z);
    let nugget = config.nugget;
    let objective = |p: &[f64]| {
        let theta: Vec<f64> = p.iter().map(|v| 10f64.powf(*v)).collect();
        reduced_likelihood_objective(&diffs, y, &theta, nugget)
    };
    let (lo, hi) = config.log10_theta_bounds;
    let seeds: Vec<Vec<f64>> = warm_theta
        .map(|t| vec![t.iter().map(|v| v.log10().clamp(lo, hi)).collect()])
        .unwrap_or_default();
    let best = multi_start_from(&objective, &search, &seeds).map_err(|e| match e {
        S2kError::UnfittableData(_) => S2kError::UnfittableData(
            "likelihood is infinite at every pattern-search start".into(),
        ),
        other => other,
    })?;
    Ok(best.best_point.iter().map(|v| 10f64.powf(*v)).collect())
}

impl KrigingModel {
    /// Builds the predictor for fixed `θ`: factorizes (escalating the
    /// nugget if needed) and profiles `β`, `σ²`.
    pub fn assemble(
        retained_inputs: RowMatrix,
        retained_outputs: Vec<f64>,
        standardizer: Standardizer,
        theta: &[f64],
        nugget: f64,
    ) -> Result<Self> {
        check_training_data(&retained_inputs, &retained_outputs)?;
        let retained_std = standardizer.inputs(&retained_inputs);
        let (factor, nugget) = build_factorized_correlation(&retained_std, theta, nugget)?;
        Ok(Self::from_factor(
            retained_inputs,
            retained_outputs,
            retained_std,
            standardizer,
            theta.to_vec(),
            nugget,
            factor,
        ))
    }

    /// Completes a model around an existing factor of `R + nugget·I`.
    pub(crate) fn from_factor(
        retained_inputs: RowMatrix,
        retained_outputs: Vec<f64>,
        retained_std: RowMatrix,
        standardizer: Standardizer,
        theta: Vec<f64>,
        nugget: f64,
        factor: PackedCholesky,
    ) -> Self {
        let n = factor.dim();
        let y: Vec<f64> = retained_outputs.iter().map(|v| standardizer.output(*v)).collect();
        let l_inv_f = factor.forward_solve(&vec![1.0; n]);
        let l_inv_y = factor.forward_solve(&y);
        let (beta, sigma2) = profile_from_whitened(&l_inv_f, &l_inv_y);
        let whitened_residual: Vec<f64> = l_inv_y
            .iter()
            .zip(&l_inv_f)
            .map(|(b, a)| b - beta * a)
            .collect();
        let alpha = factor.backward_solve(&whitened_residual);
        let ftrf = dot(&l_inv_f, &l_inv_f);
        KrigingModel {
            hyper: KrigingHyperParams {
                theta,
                beta,
                sigma2,
            },
            standardizer,
            nugget,
            retained_inputs,
            retained_outputs,
            retained_std,
            factor,
            alpha,
            l_inv_f,
            ftrf,
        }
    }

    pub fn hyper(&self) -> &KrigingHyperParams {
        &self.hyper
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn retained_inputs(&self) -> &RowMatrix {
        &self.retained_inputs
    }

    pub fn retained_outputs(&self) -> &[f64] {
        &self.retained_outputs
    }

    pub fn n_retained(&self) -> usize {
        self.retained_outputs.len()
    }

    pub fn input_dim(&self) -> usize {
        self.retained_inputs.ncols()
    }

    pub fn factor(&self) -> &PackedCholesky {
        &self.factor
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// `FᵀR⁻¹F` in standardized units.
    pub fn f_r_inv_f(&self) -> f64 {
        self.ftrf
    }

    /// Process variance `σ²` in physical output units.
    pub fn process_variance(&self) -> f64 {
        self.standardizer.variance_inverse(self.hyper.sigma2)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(S2kError::invalid(format!(
                "point has dimension {}, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(S2kError::invalid("prediction point is not finite"));
        }
        Ok(())
    }

    /// Correlations between a (physical) point and every retained input.
    /// The nugget is a jump of the correlation at zero distance, so a point
    /// equal to a retained input sees that input's column of `R + ν·I` and
    /// is interpolated exactly.
    fn correlations(&self, x: &[f64]) -> Vec<f64> {
        let z = self.standardizer.input(x);
        self.retained_std
            .rows_iter()
            .map(|row| {
                if row == z.as_slice() {
                    1.0 + self.nugget
                } else {
                    matern52_from_distance(scaled_sq_distance(&z, row, &self.hyper.theta).sqrt())
                }
            })
            .collect()
    }

    /// Standardized-space predictive mean from a correlation vector.
    fn mean_from(&self, r: &[f64]) -> f64 {
        self.hyper.beta + dot(r, &self.alpha)
    }

    /// Standardized-space predictive variance from a correlation vector.
    fn variance_from(&self, r: &[f64]) -> f64 {
        let v = self.factor.forward_solve(r);
        let rr = dot(&v, &v);
        let fr = dot(&self.l_inv_f, &v);
        let u = 1.0 - fr;
        (self.hyper.sigma2 * (1.0 - rr + u * u / self.ftrf)).max(0.0)
    }

    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.standardizer.output_inverse(self.mean_from(&self.correlations(x))))
    }

    pub fn predict_variance(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self
            .standardizer
            .variance_inverse(self.variance_from(&self.correlations(x))))
    }

    /// Predictive mean and variance in one pass.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_point(x)?;
        let r = self.correlations(x);
        Ok((
            self.standardizer.output_inverse(self.mean_from(&r)),
            self.standardizer.variance_inverse(self.variance_from(&r)),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_correlation_distance() -> f64 {
        let (mut lo, mut hi) = (0.0, 3.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if matern52_from_distance(mid) > 0.5 {
                lo = mid
            } else {
                hi = mid
            }
        }
        lo
    }

    #[test]
    fn two_point_symmetric_query_returns_trend() {
        let d = half_correlation_distance();
        let pts = RowMatrix::from_rows(&[[0.0], [d]]).unwrap();
        let m = KrigingModel::assemble(pts, vec![1.0, 2.0], Standardizer::identity(1), &[1.0], 1e-14)
            .unwrap();
        assert!((m.hyper().beta - 1.5).abs() < 1e-12);
        assert!((m.hyper().sigma2 - 0.5).abs() < 1e-12);
        // midpoint: r = [ρ, ρ], the residual weights cancel
        let v = m.predict_mean(&[0.5 * d]).unwrap();
        assert!((v - 1.5).abs() < 1e-12, "{v}");
    }

    #[test]
    fn far_field_tends_to_trend_and_inflated_variance() {
        let pts = RowMatrix::from_rows(&[[0.0], [0.7], [1.1]]).unwrap();
        let m = KrigingModel::assemble(
            pts,
            vec![1.0, 3.0, 2.0],
            Standardizer::identity(1),
            &[2.0],
            NUGGET_START,
        )
        .unwrap();
        let (mean, var) = m.predict(&[1e7]).unwrap();
        assert!((mean - m.hyper().beta).abs() < 1e-12);
        let expected = m.hyper().sigma2 * (1.0 + 1.0 / m.f_r_inv_f());
        assert!((var - expected).abs() < 1e-12 * expected);
        assert!(var >= m.hyper().sigma2);
    }

    #[test]
    fn interpolates_a_linear_function() {
        let rows: Vec<[f64; 2]> = (0..8).map(|i| [i as f64 * 0.3, 1.0]).collect();
        let x = RowMatrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] - 1.0).collect();
        let m = fit(&x, &y, &KrigingConfig::default()).unwrap();
        let scale = m.standardizer().output_scale;
        for (row, obs) in rows.iter().zip(&y) {
            let (mean, var) = m.predict(row).unwrap();
            assert!((mean - obs).abs() <= 1e-6 * (1.0 + obs.abs()), "{mean} vs {obs}");
            assert!(var <= 10.0 * m.nugget() * m.process_variance());
        }
        // Off the data the nugget is a smoothing term: the limit approaching
        // a retained input misses it by ν·α_i.
        let near = [rows[3][0] + 1e-9, 1.0];
        let (mean, _) = m.predict(&near).unwrap();
        let gap = (mean - y[3] + m.nugget() * m.alpha()[3] * scale).abs();
        assert!(gap <= 1e-6 * (1.0 + y[3].abs()), "{gap}");
    }

    #[test]
    fn refit_is_bitwise_deterministic() {
        let rows: Vec<[f64; 2]> = (0..12).map(|i| [(i as f64).sin(), (i as f64 * 0.37).cos()]).collect();
        let x = RowMatrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * r[1] + r[0].exp()).collect();
        let a = fit(&x, &y, &KrigingConfig::default()).unwrap();
        let b = fit(&x, &y, &KrigingConfig::default()).unwrap();
        assert_eq!(a.hyper(), b.hyper());
    }

    #[test]
    fn serde_round_trip_rebuilds_identical_model() {
        let rows: Vec<[f64; 1]> = (0..6).map(|i| [i as f64]).collect();
        let x = RowMatrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| r[0].sin()).collect();
        let m = fit(&x, &y, &KrigingConfig::default()).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: KrigingModel = serde_json::from_str(&json).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rejects_non_finite_queries_and_bad_data() {
        let x = RowMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let m = fit(&x, &[0.0, 1.0], &KrigingConfig::default()).unwrap();
        assert!(m.predict_mean(&[f64::NAN]).is_err());
        assert!(m.predict_variance(&[0.0, 1.0]).is_err());
        let one = RowMatrix::from_rows(&[[0.0]]).unwrap();
        assert!(fit(&one, &[1.0], &KrigingConfig::default()).is_err());
        assert!(fit(&x, &[1.0, f64::INFINITY], &KrigingConfig::default()).is_err());
    }
}
