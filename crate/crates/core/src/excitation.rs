//! Stochastic excitation models with closed-form realizations.
//!
//! * [`SpectralWhiteNoise`]: band-limited white noise written as a finite sum
//!   of harmonics with standard-normal (optionally magnified) coefficients.
//! * [`RandomHarmonic`]: `A sin(b t)` with uniformly distributed `A`, `b`.
//!
//! Realizations are evaluated exactly at any `t`, so integrators can sample
//! them at intermediate Runge-Kutta stage times.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, S2kError};

/// Anything that yields a scalar excitation value at time `t`.
pub trait Excitation: Send + Sync {
    fn value(&self, t: f64) -> f64;
}

impl<F> Excitation for F
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn value(&self, t: f64) -> f64 {
        self(t)
    }
}

/// Frequency-domain white noise `u(t) = √(2SΔω) Σ [ϑᵢ cos ωᵢt + ϑ_{d/2+i} sin ωᵢt]`
/// with `Δω = 30π/d`, `ωᵢ = iΔω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralWhiteNoise {
    /// Spectral intensity `S` (m²/s³).
    pub intensity: f64,
    /// Number of standard normals `d` (even).
    pub n_normals: usize,
    /// Standard deviation of the coefficients.
    pub magnification: f64,
    pub seed: Option<u64>,
    pub coefficients: Vec<f64>,
}

impl SpectralWhiteNoise {
    pub fn delta_omega(n_normals: usize) -> f64 {
        30.0 * PI / n_normals as f64
    }

    fn check(intensity: f64, n_normals: usize, magnification: f64) -> Result<()> {
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(S2kError::invalid("spectral intensity must be positive"));
        }
        if n_normals == 0 || n_normals % 2 != 0 {
            return Err(S2kError::invalid("number of normals must be even and positive"));
        }
        if !(magnification > 0.0 && magnification.is_finite()) {
            return Err(S2kError::invalid("magnification must be positive"));
        }
        Ok(())
    }

    /// Draws coefficients `ϑᵢ ~ N(0, magnification²)` from a ChaCha stream
    /// keyed by `seed`.
    pub fn sample(intensity: f64, n_normals: usize, magnification: f64, seed: u64) -> Result<Self> {
        Self::check(intensity, n_normals, magnification)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, magnification)
            .map_err(|e| S2kError::invalid(format!("normal distribution: {e}")))?;
        let coefficients = (0..n_normals).map(|_| normal.sample(&mut rng)).collect();
        Ok(SpectralWhiteNoise {
            intensity,
            n_normals,
            magnification,
            seed: Some(seed),
            coefficients,
        })
    }

    /// A realization with given coefficients.
    pub fn from_coefficients(intensity: f64, magnification: f64, coefficients: Vec<f64>) -> Result<Self> {
        Self::check(intensity, coefficients.len(), magnification)?;
        if !coefficients.iter().all(|c| c.is_finite()) {
            return Err(S2kError::invalid("coefficients must be finite"));
        }
        Ok(SpectralWhiteNoise {
            intensity,
            n_normals: coefficients.len(),
            magnification,
            seed: None,
            coefficients,
        })
    }

    /// Highest frequency in the sum, `(d/2)Δω = 15π`.
    pub fn max_frequency(&self) -> f64 {
        (self.n_normals / 2) as f64 * Self::delta_omega(self.n_normals)
    }

    pub fn value(&self, t: f64) -> f64 {
        let half = self.n_normals / 2;
        let dw = Self::delta_omega(self.n_normals);
        let amplitude = (2.0 * self.intensity * dw).sqrt();
        let (cos_cof, sin_cof) = self.coefficients.split_at(half);
        // cos(iΔωt), sin(iΔωt) by exact angle addition from the first harmonic
        let (s1, c1) = (dw * t).sin_cos();
        let (mut s, mut c) = (s1, c1);
        let mut acc = 0.0;
        for (a, b) in cos_cof.iter().zip(sin_cof) {
            acc += a * c + b * s;
            let next_c = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = next_c;
        }
        amplitude * acc
    }
}

/// Random harmonic `u(t) = A sin(b t)`, `A ~ U(0.09, 0.11)`,
/// `b ~ U(1.8π, 2.2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomHarmonic {
    pub amplitude: f64,
    pub frequency: f64,
    pub seed: Option<u64>,
}

impl RandomHarmonic {
    pub const AMPLITUDE_RANGE: (f64, f64) = (0.09, 0.11);
    pub const FREQUENCY_RANGE: (f64, f64) = (1.8 * PI, 2.2 * PI);

    pub fn new(amplitude: f64, frequency: f64) -> Result<Self> {
        let (alo, ahi) = Self::AMPLITUDE_RANGE;
        let (blo, bhi) = Self::FREQUENCY_RANGE;
        if !(amplitude >= alo && amplitude <= ahi && frequency >= blo && frequency <= bhi) {
            return Err(S2kError::invalid("harmonic parameters outside their supports"));
        }
        Ok(RandomHarmonic {
            amplitude,
            frequency,
            seed: None,
        })
    }

    pub fn sample(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (alo, ahi) = Self::AMPLITUDE_RANGE;
        let (blo, bhi) = Self::FREQUENCY_RANGE;
        RandomHarmonic {
            amplitude: rng.random_range(alo..ahi),
            frequency: rng.random_range(blo..bhi),
            seed: Some(seed),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * (self.frequency * t).sin()
    }
}

/// A sampled excitation history, serializable with its parameters and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExcitationRealization {
    Spectral(SpectralWhiteNoise),
    Harmonic(RandomHarmonic),
}

impl Excitation for ExcitationRealization {
    fn value(&self, t: f64) -> f64 {
        match self {
            ExcitationRealization::Spectral(s) => s.value(t),
            ExcitationRealization::Harmonic(h) => h.value(t),
        }
    }
}

impl ExcitationRealization {
    pub fn seed(&self) -> Option<u64> {
        match self {
            ExcitationRealization::Spectral(s) => s.seed,
            ExcitationRealization::Harmonic(h) => h.seed,
        }
    }
}

pub fn sample_spectral(intensity: f64, n_normals: usize, magnification: f64, seed: u64) -> Result<ExcitationRealization> {
    SpectralWhiteNoise::sample(intensity, n_normals, magnification, seed).map(ExcitationRealization::Spectral)
}

pub fn sample_harmonic(seed: u64) -> ExcitationRealization {
    ExcitationRealization::Harmonic(RandomHarmonic::sample(seed))
}

/// Default magnification when only one training history is used.
pub const SINGLE_HISTORY_MAGNIFICATION: f64 = 1.5;

/// Magnification factors `σ_k = 1 + (k−1)/(n_t−1)` for a mixture of `n_t`
/// training histories; for a single history, `[single]`.
pub fn magnification_schedule(n_histories: usize, single: f64) -> Result<Vec<f64>> {
    match n_histories {
        0 => Err(S2kError::invalid("need at least one training history")),
        1 => Ok(vec![single]),
        n => Ok((0..n).map(|k| 1.0 + k as f64 / (n - 1) as f64).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_sum(s: &SpectralWhiteNoise, t: f64) -> f64 {
        let half = s.n_normals / 2;
        let dw = SpectralWhiteNoise::delta_omega(s.n_normals);
        let mut acc = 0.0;
        for i in 1..=half {
            let w = i as f64 * dw;
            acc += s.coefficients[i - 1] * (w * t).cos() + s.coefficients[half + i - 1] * (w * t).sin();
        }
        (2.0 * s.intensity * dw).sqrt() * acc
    }

    #[test]
    fn recurrence_matches_direct_trigonometric_sum() {
        let s = SpectralWhiteNoise::sample(0.1, 150, 1.0, 42).unwrap();
        for k in 0..=400 {
            let t = k as f64 * 0.025 + 0.0013;
            let a = s.value(t);
            let b = direct_sum(&s, t);
            assert!((a - b).abs() < 1e-11 * (1.0 + b.abs()), "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn zero_coefficients_give_zero_signal() {
        let s = SpectralWhiteNoise::from_coefficients(0.1, 1.0, vec![0.0; 150]).unwrap();
        assert!((0..100).all(|k| s.value(k as f64 * 0.1) == 0.0));
    }

    #[test]
    fn band_limit() {
        let s = SpectralWhiteNoise::sample(0.1, 150, 1.0, 1).unwrap();
        assert!((s.max_frequency() - 15.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn pointwise_variance_scales_with_magnification_squared() {
        let var = |sigma: f64| {
            let n = 4000;
            let t = 1.234;
            let vals: Vec<f64> = (0..n)
                .map(|k| SpectralWhiteNoise::sample(0.1, 150, sigma, k).unwrap().value(t))
                .collect();
            vals.iter().map(|v| v * v).sum::<f64>() / n as f64
        };
        let ratio = var(2.0) / var(1.0);
        // same seeds: coefficients scale exactly by 2
        assert!((ratio - 4.0).abs() < 1e-9, "{ratio}");
    }

    #[test]
    fn invalid_spectral_parameters() {
        assert!(SpectralWhiteNoise::sample(0.0, 150, 1.0, 0).is_err());
        assert!(SpectralWhiteNoise::sample(0.1, 151, 1.0, 0).is_err());
        assert!(SpectralWhiteNoise::sample(0.1, 150, -1.0, 0).is_err());
    }

    #[test]
    fn seeds_reproduce_and_distinguish() {
        let a = SpectralWhiteNoise::sample(0.1, 150, 1.0, 5).unwrap();
        let b = SpectralWhiteNoise::sample(0.1, 150, 1.0, 5).unwrap();
        let c = SpectralWhiteNoise::sample(0.1, 150, 1.0, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.coefficients, c.coefficients);
    }

    #[test]
    fn harmonic_support_and_zero_at_origin() {
        for seed in 0..500 {
            let h = RandomHarmonic::sample(seed);
            assert!(h.amplitude >= 0.09 && h.amplitude < 0.11);
            assert!(h.frequency >= 1.8 * PI && h.frequency < 2.2 * PI);
            assert_eq!(h.value(0.0), 0.0);
            assert!((0..200).all(|k| h.value(k as f64 * 0.05).abs() <= 0.11));
        }
        let h = RandomHarmonic::new(0.0964, 6.5248).unwrap();
        assert!((h.value(0.25) - 0.0964 * (6.5248f64 * 0.25).sin()).abs() < 1e-16);
        assert!(RandomHarmonic::new(0.2, 6.5).is_err());
    }

    #[test]
    fn schedule_values() {
        assert_eq!(magnification_schedule(3, 1.5).unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(magnification_schedule(2, 1.5).unwrap(), vec![1.0, 2.0]);
        assert_eq!(magnification_schedule(5, 1.5).unwrap(), vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        assert_eq!(magnification_schedule(1, 1.5).unwrap(), vec![1.5]);
        assert!(magnification_schedule(0, 1.5).is_err());
    }

    #[test]
    fn realization_json_round_trip() {
        let r = sample_spectral(0.05, 150, 1.5, 9).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"kind\":\"spectral\""));
        let back: ExcitationRealization = serde_json::from_str(&s).unwrap();
        assert_eq!(r, back);
        assert_eq!(back.value(0.7), r.value(0.7));
    }
}
