//! The four benchmark systems, a tight-tolerance reference integrator, and
//! per-benchmark experiment defaults.

mod systems;
mod trajectory;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use systems::{BoucWen, DamperConvention, Duffing, DynamicalSystem, QuarterCar, TwoStory};
pub use trajectory::{time_grid, Trajectory};

use crate::error::{Result, S2kError};
use crate::excitation::{self, Excitation, ExcitationRealization};
use crate::integrate::{dop853_on_grid, Dop853Options};
use crate::linalg::RowMatrix;

/// Integrates `system` under `excitation` from `x0` and samples the solution
/// at `t_i = i·dt`, `i = 0..=T/dt`. Derivatives are `rhs` evaluated at the
/// sampled states.
pub fn reference_integrate(
    system: &dyn DynamicalSystem,
    excitation: &dyn Excitation,
    x0: &[f64],
    dt: f64,
    duration: f64,
) -> Result<Trajectory> {
    reference_integrate_with(system, excitation, x0, dt, duration, &Dop853Options::default())
}

pub fn reference_integrate_with(
    system: &dyn DynamicalSystem,
    excitation: &dyn Excitation,
    x0: &[f64],
    dt: f64,
    duration: f64,
    options: &Dop853Options,
) -> Result<Trajectory> {
    let n = system.state_dim();
    if x0.len() != n {
        return Err(S2kError::invalid(format!("initial state has {} entries, system has {n}", x0.len())));
    }
    let times = time_grid(dt, duration)?;
    let samples = dop853_on_grid(|t, x, dx| system.rhs(t, x, excitation.value(t), dx), x0, &times, options)?;
    let mut states = RowMatrix::zeros(times.len(), n);
    let mut derivatives = RowMatrix::zeros(times.len(), n);
    let mut u_values = Vec::with_capacity(times.len());
    for (j, (&t, x)) in times.iter().zip(&samples).enumerate() {
        let u = excitation.value(t);
        states.row_mut(j).copy_from_slice(x);
        system.rhs(t, x, u, derivatives.row_mut(j));
        u_values.push(u);
    }
    if !states.all_finite() || !derivatives.all_finite() {
        return Err(S2kError::Divergence { t: duration });
    }
    Ok(Trajectory {
        times,
        states,
        derivatives,
        excitation: u_values,
        excitation_manifest: None,
    })
}

/// Reference trajectory under a serializable excitation; the realization is
/// attached to the result.
pub fn reference_trajectory(
    system: &dyn DynamicalSystem,
    excitation: &ExcitationRealization,
    x0: &[f64],
    dt: f64,
    duration: f64,
) -> Result<Trajectory> {
    let mut t = reference_integrate(system, excitation, x0, dt, duration)?;
    t.excitation_manifest = Some(excitation.clone());
    Ok(t)
}

/// How a benchmark is excited.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExcitationModel {
    Harmonic,
    Spectral { intensity: f64, n_normals: usize },
}

impl ExcitationModel {
    /// Draws one realization. Magnification scales the spectral
    /// coefficients; the harmonic model only accepts `1`.
    pub fn sample(&self, magnification: f64, seed: u64) -> Result<ExcitationRealization> {
        match *self {
            ExcitationModel::Harmonic => {
                if magnification != 1.0 {
                    return Err(S2kError::invalid("the harmonic excitation has no magnification"));
                }
                Ok(excitation::sample_harmonic(seed))
            }
            ExcitationModel::Spectral { intensity, n_normals } => {
                excitation::sample_spectral(intensity, n_normals, magnification, seed)
            }
        }
    }

    pub fn supports_magnification(&self) -> bool {
        matches!(self, ExcitationModel::Spectral { .. })
    }
}

/// Spectral intensity of the two-story frame's ground motion. At unit
/// magnification the first story reaches its yield plateau with peak drifts
/// near 0.06 m (ductility about 10).
pub const TWO_STORY_INTENSITY: f64 = 0.01;

/// The four benchmark problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Benchmark {
    QuarterCar,
    Duffing,
    BoucWen,
    TwoStory,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [Benchmark::QuarterCar, Benchmark::Duffing, Benchmark::BoucWen, Benchmark::TwoStory];

    pub fn name(&self) -> &'static str {
        match self {
            Benchmark::QuarterCar => "quarter-car",
            Benchmark::Duffing => "duffing",
            Benchmark::BoucWen => "bouc-wen",
            Benchmark::TwoStory => "two-story",
        }
    }

    pub fn system(&self) -> Box<dyn DynamicalSystem> {
        match self {
            Benchmark::QuarterCar => Box::new(QuarterCar::default()),
            Benchmark::Duffing => Box::new(Duffing::default()),
            Benchmark::BoucWen => Box::new(BoucWen::default()),
            Benchmark::TwoStory => Box::new(TwoStory::default()),
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Benchmark::QuarterCar => 4,
            Benchmark::Duffing => 2,
            Benchmark::BoucWen => 3,
            Benchmark::TwoStory => 8,
        }
    }

    /// Mechanical degrees of freedom (displacement coordinates).
    pub fn degrees_of_freedom(&self) -> usize {
        match self {
            Benchmark::QuarterCar | Benchmark::TwoStory => 2,
            Benchmark::Duffing | Benchmark::BoucWen => 1,
        }
    }

    pub fn excitation_model(&self) -> ExcitationModel {
        match self {
            Benchmark::QuarterCar => ExcitationModel::Harmonic,
            Benchmark::Duffing => ExcitationModel::Spectral {
                intensity: 0.1,
                n_normals: 150,
            },
            Benchmark::BoucWen => ExcitationModel::Spectral {
                intensity: 0.05,
                n_normals: 150,
            },
            Benchmark::TwoStory => ExcitationModel::Spectral {
                intensity: TWO_STORY_INTENSITY,
                n_normals: 150,
            },
        }
    }

    pub fn default_dt(&self) -> f64 {
        match self {
            Benchmark::TwoStory => 0.01,
            _ => 0.002,
        }
    }

    pub fn default_duration(&self) -> f64 {
        match self {
            Benchmark::BoucWen => 8.0,
            _ => 10.0,
        }
    }

    pub fn default_delta(&self) -> f64 {
        match self {
            Benchmark::QuarterCar | Benchmark::Duffing => 1e-6,
            Benchmark::BoucWen => 1e-4,
            Benchmark::TwoStory => 5e-4,
        }
    }

    /// Polynomial degree of the NARX baseline.
    pub fn narx_degree(&self) -> usize {
        match self {
            Benchmark::BoucWen => 5,
            _ => 3,
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = S2kError;

    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| S2kError::invalid(format!("unknown benchmark {s:?}; expected quarter-car, duffing, bouc-wen or two-story")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct Scalar(fn(f64, f64, f64) -> f64);

    impl DynamicalSystem for Scalar {
        fn name(&self) -> &'static str {
            "scalar"
        }
        fn state_dim(&self) -> usize {
            1
        }
        fn rhs(&self, t: f64, x: &[f64], u: f64, out: &mut [f64]) {
            out[0] = (self.0)(t, x[0], u);
        }
        fn parameters(&self) -> serde_json::Value {
            serde_json::Value::Null
        }
    }

    #[derive(Debug)]
    struct Oscillator;

    impl DynamicalSystem for Oscillator {
        fn name(&self) -> &'static str {
            "oscillator"
        }
        fn state_dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, x: &[f64], _u: f64, out: &mut [f64]) {
            out[0] = x[1];
            out[1] = -4.0 * x[0];
        }
        fn parameters(&self) -> serde_json::Value {
            serde_json::Value::Null
        }
    }

    #[test]
    fn decay_closed_form() {
        let tr = reference_integrate(&Scalar(|_, x, _| -x), &|_: f64| 0.0, &[1.0], 0.01, 1.0).unwrap();
        assert_eq!(tr.len(), 101);
        assert!((tr.states.get(100, 0) - (-1f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn driven_integrator_closed_form() {
        let tr = reference_integrate(&Scalar(|_, _, u| u), &|t: f64| t.sin(), &[0.0], 0.01, 3.0).unwrap();
        let last = tr.len() - 1;
        assert!((tr.states.get(last, 0) - (1.0 - 3f64.cos())).abs() < 1e-9);
    }

    #[test]
    fn oscillator_energy_drift() {
        let tr = reference_integrate(&Oscillator, &|_: f64| 0.0, &[1.0, 0.0], 0.002, 10.0).unwrap();
        let energy = |j: usize| 4.0 * tr.states.get(j, 0).powi(2) + tr.states.get(j, 1).powi(2);
        let e0 = energy(0);
        let drift = (0..tr.len()).map(|j| (energy(j) - e0).abs() / e0).fold(0.0, f64::max);
        assert!(drift < 1e-8, "{drift}");
    }

    #[test]
    fn derivatives_are_exact_rhs_images() {
        let sys = Duffing::default();
        let exc = excitation::sample_spectral(0.1, 150, 1.0, 3).unwrap();
        let tr = reference_trajectory(&sys, &exc, &[0.0, 0.0], 0.002, 1.0).unwrap();
        let mut out = [0.0; 2];
        for j in 0..tr.len() {
            assert_eq!(tr.excitation[j], exc.value(tr.times[j]));
            sys.rhs(tr.times[j], tr.states.row(j), tr.excitation[j], &mut out);
            assert_eq!(&out[..], tr.derivatives.row(j));
        }
        assert_eq!(tr.excitation_manifest, Some(exc));
    }

    #[test]
    fn halving_tolerance_barely_moves_the_samples() {
        let sys = BoucWen::default();
        let exc = excitation::sample_spectral(0.05, 150, 1.5, 8).unwrap();
        let base = reference_integrate(&sys, &exc, &[0.0; 3], 0.002, 2.0).unwrap();
        let opts = Dop853Options {
            rtol: 0.5e-10,
            atol: 0.5e-12,
            ..Default::default()
        };
        let half = reference_integrate_with(&sys, &exc, &[0.0; 3], 0.002, 2.0, &opts).unwrap();
        for c in 0..3 {
            let a = base.state_series(c);
            let b = half.state_series(c);
            let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let diff = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(diff < 1e-8 * scale, "component {c}: {diff} vs {scale}");
        }
    }

    #[test]
    fn benchmark_names_round_trip() {
        for b in Benchmark::ALL {
            assert_eq!(b.name().parse::<Benchmark>().unwrap(), b);
            assert_eq!(b.system().state_dim(), b.state_dim());
            assert_eq!(b.system().name(), b.name());
        }
        assert!("pendulum".parse::<Benchmark>().is_err());
    }

    #[test]
    fn harmonic_rejects_magnification() {
        assert!(ExcitationModel::Harmonic.sample(1.5, 0).is_err());
        assert!(ExcitationModel::Harmonic.sample(1.0, 0).is_ok());
    }
}
