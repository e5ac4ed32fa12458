use serde::{Deserialize, Serialize};

use crate::error::{Result, S2kError};
use crate::linalg::RowMatrix;

/// Affine map to zero-mean, unit-variance coordinates for inputs and the
/// scalar output. Degenerate (constant) coordinates get unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub input_shift: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub output_shift: f64,
    pub output_scale: f64,
}

fn mean_and_scale(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    // relative cutoff: a coordinate varying at round-off level is constant
    if sd.is_finite() && sd > 1e-12 * mean.abs().max(f64::MIN_POSITIVE) {
        (mean, sd)
    } else {
        (mean, 1.0)
    }
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            input_shift: vec![0.0; dim],
            input_scale: vec![1.0; dim],
            output_shift: 0.0,
            output_scale: 1.0,
        }
    }

    /// Population mean / standard deviation of every input column and of the
    /// outputs.
    pub fn fit(inputs: &RowMatrix, outputs: &[f64]) -> Result<Self> {
        if inputs.nrows() != outputs.len() || inputs.nrows() == 0 {
            return Err(S2kError::invalid("standardizer: empty or mismatched data"));
        }
        let (input_shift, input_scale) = (0..inputs.ncols())
            .map(|j| mean_and_scale(inputs.rows_iter().map(move |r| r[j])))
            .unzip();
        let (output_shift, output_scale) = mean_and_scale(outputs.iter().copied());
        Ok(Standardizer {
            input_shift,
            input_scale,
            output_shift,
            output_scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.input_shift.len()
    }

    #[inline]
    pub fn input_into(&self, x: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(x).zip(&self.input_shift).zip(&self.input_scale) {
            *o = (v - m) / s;
        }
    }

    pub fn input(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.input_into(x, &mut out);
        out
    }

    pub fn input_inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.input_shift)
            .zip(&self.input_scale)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }

    pub fn inputs(&self, x: &RowMatrix) -> RowMatrix {
        let mut out = RowMatrix::zeros(x.nrows(), x.ncols());
        for i in 0..x.nrows() {
            self.input_into(x.row(i), out.row_mut(i));
        }
        out
    }

    #[inline]
    pub fn output(&self, y: f64) -> f64 {
        (y - self.output_shift) / self.output_scale
    }

    #[inline]
    pub fn output_inverse(&self, z: f64) -> f64 {
        z * self.output_scale + self.output_shift
    }

    #[inline]
    pub fn variance_inverse(&self, v: f64) -> f64 {
        v * self.output_scale * self.output_scale
    }
}
