use crate::error::{Result, S2kError};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Matérn-5/2 correlation as a function of the scaled distance `r`.
#[inline]
pub fn matern52_from_distance(r: f64) -> f64 {
    let s = SQRT5 * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// `Σ θ_d (a_d − b_d)²`, the squared anisotropic distance.
#[inline]
pub fn scaled_sq_distance(a: &[f64], b: &[f64], theta: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(theta)
        .map(|((x, y), t)| {
            let d = x - y;
            t * d * d
        })
        .sum()
}

/// Matérn-5/2 correlation between two points with inverse-squared length
/// scales `theta` on the diagonal of the distance metric.
pub fn matern52(a: &[f64], b: &[f64], theta: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() != theta.len() {
        return Err(S2kError::invalid("matern52: dimension mismatch"));
    }
    if !a.iter().chain(b).all(|v| v.is_finite()) {
        return Err(S2kError::invalid("matern52: non-finite point"));
    }
    if !theta.iter().all(|t| t.is_finite() && *t > 0.0) {
        return Err(S2kError::invalid("matern52: theta must be finite and positive"));
    }
    Ok(matern52_from_distance(scaled_sq_distance(a, b, theta).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_at_zero_distance() {
        assert_eq!(matern52(&[0.3, -2.0], &[0.3, -2.0], &[5.0, 0.1]).unwrap(), 1.0);
    }

    #[test]
    fn closed_form_at_unit_distance() {
        // (1 + √5 + 5/3) e^{-√5}, evaluated to 20 digits with mpmath
        let v = matern52(&[0.0], &[1.0], &[1.0]).unwrap();
        assert!((v - 0.523_994_108_831_820_3).abs() < 1e-12, "{v}");
    }

    #[test]
    fn far_field_underflows() {
        let v = matern52(&[0.0], &[1e6], &[1.0]).unwrap();
        assert!(v < 1e-300);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matern52(&[f64::NAN], &[0.0], &[1.0]).is_err());
        assert!(matern52(&[0.0], &[0.0], &[0.0]).is_err());
        assert!(matern52(&[0.0, 1.0], &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn strictly_decreasing_on_a_grid() {
        let mut prev = matern52_from_distance(0.0);
        for k in 1..2000 {
            let r = k as f64 * 0.01;
            let v = matern52_from_distance(r);
            assert!(v < prev, "not decreasing at r = {r}");
            prev = v;
        }
    }
}
