//! Accuracy measures for emulated histories and small summary statistics.

use crate::error::{Result, S2kError};

/// `Σ(x − x̂)² / Σ(x − x̄)²`, with `x̄` the mean of `truth`.
pub fn relative_error(truth: &[f64], prediction: &[f64]) -> Result<f64> {
    if truth.len() != prediction.len() {
        return Err(S2kError::invalid("truth and prediction differ in length"));
    }
    if truth.len() < 2 {
        return Err(S2kError::invalid("relative error needs at least two samples"));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let den: f64 = truth.iter().map(|x| (x - mean).powi(2)).sum();
    if den == 0.0 {
        return Err(S2kError::UndefinedDenominator);
    }
    let num: f64 = truth.iter().zip(prediction).map(|(x, p)| (x - p).powi(2)).sum();
    Ok(num / den)
}

/// Arithmetic mean; `NaN` for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Linear-interpolation quantile of sorted data (the usual "type 7"
/// definition). `sorted` must be non-empty and ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    // Avoid inf − inf when both neighbours are the same infinite value.
    if lo == hi || sorted[lo] == sorted[hi] {
        return sorted[lo];
    }
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quantile of unsorted data; `NaN` entries sort last.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_values() {
        assert_eq!(relative_error(&[0.0, 1.0, 2.0], &[0.0, 1.0, 3.0]).unwrap(), 0.5);
        assert_eq!(relative_error(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(relative_error(&[0.0, 1.0, 2.0], &[1.0; 3]).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(relative_error(&[3.0; 4], &[1.0; 4]), Err(S2kError::UndefinedDenominator));
        assert!(relative_error(&[1.0, 2.0], &[1.0]).is_err());
        assert!(relative_error(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn quantiles() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(median(&v), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!((quantile(&v, 0.1) - 1.3).abs() < 1e-15);
        assert_eq!(median(&[1.0, f64::INFINITY, f64::INFINITY]), f64::INFINITY);
        assert_eq!(median(&[7.0]), 7.0);
    }

    proptest! {
        #[test]
        fn relative_error_is_nonnegative_and_zero_on_truth(
            truth in prop::collection::vec(-1e3f64..1e3, 2..40),
            noise in prop::collection::vec(-1.0f64..1.0, 40),
        ) {
            prop_assume!(truth.iter().any(|&x| x != truth[0]));
            let pred: Vec<f64> = truth.iter().zip(&noise).map(|(x, e)| x + e).collect();
            prop_assert!(relative_error(&truth, &pred).unwrap() >= 0.0);
            prop_assert_eq!(relative_error(&truth, &truth).unwrap(), 0.0);
        }

        #[test]
        fn quantile_is_monotone_and_bracketed(v in prop::collection::vec(-1e6f64..1e6, 1..50), p in 0.0f64..1.0, q in 0.0f64..1.0) {
            let (a, b) = if p <= q { (p, q) } else { (q, p) };
            let qa = quantile(&v, a);
            let qb = quantile(&v, b);
            prop_assert!(qa <= qb);
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= qa && qb <= hi);
        }
    }
}
