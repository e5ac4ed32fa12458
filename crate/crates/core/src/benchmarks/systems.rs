use serde::{Deserialize, Serialize};

/// A first-order system `ẋ = f(t, x, u)` with scalar excitation `u`.
pub trait DynamicalSystem: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;
    fn state_dim(&self) -> usize;
    fn excitation_dim(&self) -> usize {
        1
    }
    /// Writes `f(t, x, u)` into `out`; `x.len() == out.len() == state_dim()`.
    fn rhs(&self, t: f64, x: &[f64], u: f64, out: &mut [f64]);
    fn parameters(&self) -> serde_json::Value;
}

/// Sign of the damper force acting on the unsprung mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DamperConvention {
    /// Same sign on both masses. Damping then injects energy into the
    /// wheel, so trajectories are larger and rougher.
    SameSign,
    /// Equal and opposite damper forces on the two masses.
    #[default]
    Reaction,
}

/// Two-mass quarter car with a cubic suspension spring. State
/// `[x₁, ẋ₁, x₂, ẋ₂]`, excitation is the road displacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarterCar {
    pub sprung_mass: f64,
    pub unsprung_mass: f64,
    pub suspension_stiffness: f64,
    pub damping: f64,
    pub tire_stiffness: f64,
    pub damper: DamperConvention,
}

impl Default for QuarterCar {
    fn default() -> Self {
        QuarterCar {
            sprung_mass: 22.7,
            unsprung_mass: 42.0,
            suspension_stiffness: 1897.02,
            damping: 601.8,
            tire_stiffness: 1771.4,
            damper: DamperConvention::Reaction,
        }
    }
}

impl DynamicalSystem for QuarterCar {
    fn name(&self) -> &'static str {
        "quarter-car"
    }
    fn state_dim(&self) -> usize {
        4
    }
    fn rhs(&self, _t: f64, x: &[f64], u: f64, out: &mut [f64]) {
        let spring = self.suspension_stiffness * (x[0] - x[2]).powi(3);
        let damper = self.damping * (x[1] - x[3]);
        out[0] = x[1];
        out[1] = -(spring + damper) / self.sprung_mass;
        out[2] = x[3];
        let damper_on_wheel = match self.damper {
            DamperConvention::SameSign => -damper,
            DamperConvention::Reaction => damper,
        };
        out[3] = (spring + damper_on_wheel + self.tire_stiffness * (u - x[2])) / self.unsprung_mass;
    }
    fn parameters(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or_default()
    }
}

/// Duffing oscillator `ẍ + 2ζωₙẋ + ωₙ²x + βx³ = u`. State `[x, ẋ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Duffing {
    pub damping_ratio: f64,
    pub natural_frequency: f64,
    pub cubic_stiffness: f64,
}

impl Default for Duffing {
    fn default() -> Self {
        Duffing {
            damping_ratio: 0.05,
            natural_frequency: 10.0,
            cubic_stiffness: 2000.0,
        }
    }
}

impl DynamicalSystem for Duffing {
    fn name(&self) -> &'static str {
        "duffing"
    }
    fn state_dim(&self) -> usize {
        2
    }
    fn rhs(&self, _t: f64, x: &[f64], u: f64, out: &mut [f64]) {
        let wn = self.natural_frequency;
        out[0] = x[1];
        out[1] = u - 2.0 * self.damping_ratio * wn * x[1] - wn * wn * x[0] - self.cubic_stiffness * x[0].powi(3);
    }
    fn parameters(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or_default()
    }
}

/// Single-degree-of-freedom Bouc-Wen oscillator. State `[x, ẋ, z]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoucWen {
    pub mass: f64,
    pub stiffness: f64,
    pub damping_ratio: f64,
    pub post_yield_ratio: f64,
    pub yield_displacement: f64,
    pub beta: f64,
    pub gamma: f64,
    pub a: f64,
    pub exponent: i32,
}

impl Default for BoucWen {
    fn default() -> Self {
        BoucWen {
            mass: 6e4,
            stiffness: 5e6,
            damping_ratio: 0.05,
            post_yield_ratio: 0.5,
            yield_displacement: 0.04,
            beta: 0.5,
            gamma: 0.5,
            a: 1.0,
            exponent: 3,
        }
    }
}

impl BoucWen {
    /// `c/m = 2ζ√(k/m)`.
    pub fn damping_over_mass(&self) -> f64 {
        2.0 * self.damping_ratio * (self.stiffness / self.mass).sqrt()
    }
}

impl DynamicalSystem for BoucWen {
    fn name(&self) -> &'static str {
        "bouc-wen"
    }
    fn state_dim(&self) -> usize {
        3
    }
    fn rhs(&self, _t: f64, x: &[f64], u: f64, out: &mut [f64]) {
        let (v, z) = (x[1], x[2]);
        let alpha = self.post_yield_ratio;
        let xy = self.yield_displacement;
        let az = z.abs();
        out[0] = v;
        out[1] = -self.damping_over_mass() * v - self.stiffness / self.mass * (alpha * x[0] + (1.0 - alpha) * xy * z) + u;
        out[2] = (self.a * v - self.beta * v.abs() * az.powi(self.exponent - 1) * z - self.gamma * v * az.powi(self.exponent)) / xy;
    }
    fn parameters(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or_default()
    }
}

/// Two-story shear frame with degrading, pinching Bouc-Wen inter-story
/// springs under ground acceleration. State
/// `[x₁, x₂, ẋ₁, ẋ₂, z₁, z₂, ε₁, ε₂]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStory {
    pub mass: f64,
    pub stiffness: f64,
    pub post_yield_ratio: f64,
    pub beta: f64,
    pub gamma: f64,
    pub d_nu: f64,
    pub d_eta: f64,
    pub p: f64,
    pub q: f64,
    pub d_psi: f64,
    pub lambda: f64,
    pub zeta_s: f64,
    pub psi: f64,
    pub modal_damping: f64,
    /// Rayleigh mass coefficient `a₀`.
    pub rayleigh_mass: f64,
    /// Rayleigh stiffness coefficient `a₁`.
    pub rayleigh_stiffness: f64,
}

impl Default for TwoStory {
    fn default() -> Self {
        let mut s = TwoStory {
            mass: 2.6e5,
            stiffness: 1e8,
            post_yield_ratio: 0.04,
            beta: 15.0,
            gamma: 150.0,
            d_nu: 1000.0,
            d_eta: 1000.0,
            p: 1000.0,
            q: 0.25,
            d_psi: 5.0,
            lambda: 0.5,
            zeta_s: 0.99,
            psi: 0.05,
            modal_damping: 0.05,
            rayleigh_mass: 0.0,
            rayleigh_stiffness: 0.0,
        };
        s.calibrate_rayleigh();
        s
    }
}

impl TwoStory {
    /// Circular frequencies of the undamped elastic system `(M, K₀)`,
    /// `K₀ = K[[2, −1], [−1, 1]]`, `M = mI`.
    pub fn elastic_frequencies(&self) -> [f64; 2] {
        let r = self.stiffness / self.mass;
        let s5 = 5f64.sqrt();
        [(r * (3.0 - s5) / 2.0).sqrt(), (r * (3.0 + s5) / 2.0).sqrt()]
    }

    /// Sets `a₀`, `a₁` so that both elastic modes have `modal_damping`.
    pub fn calibrate_rayleigh(&mut self) {
        let [w1, w2] = self.elastic_frequencies();
        let z = self.modal_damping;
        self.rayleigh_mass = 2.0 * z * w1 * w2 / (w1 + w2);
        self.rayleigh_stiffness = 2.0 * z / (w1 + w2);
    }

    /// `C = a₀M + a₁K₀` as a row-major 2×2 array.
    pub fn damping_matrix(&self) -> [[f64; 2]; 2] {
        let (a0, a1) = (self.rayleigh_mass, self.rayleigh_stiffness);
        let (m, k) = (self.mass, self.stiffness);
        [[a0 * m + 2.0 * a1 * k, -a1 * k], [-a1 * k, a0 * m + a1 * k]]
    }

    fn hysteretic_rate(&self, drift_rate: f64, z: f64, energy: f64) -> f64 {
        let kappa = 1.0 + self.d_nu * energy;
        let varpi = drift_rate - kappa * (self.beta * drift_rate.abs() * z + self.gamma * drift_rate * z.abs());
        let xi = self.zeta_s * (1.0 - (-self.p * energy).exp());
        let sgn = if drift_rate > 0.0 {
            1.0
        } else if drift_rate < 0.0 {
            -1.0
        } else {
            0.0
        };
        let arg = (z * sgn - self.q / ((self.beta + self.gamma) * kappa))
            / ((self.psi + self.d_psi * energy) * (self.lambda + self.zeta_s * xi));
        varpi / (1.0 + self.d_eta * energy) * (1.0 - xi * (-arg * arg).exp())
    }
}

impl DynamicalSystem for TwoStory {
    fn name(&self) -> &'static str {
        "two-story"
    }
    fn state_dim(&self) -> usize {
        8
    }
    fn rhs(&self, _t: f64, x: &[f64], u: f64, out: &mut [f64]) {
        let drift = [x[0], x[1] - x[0]];
        let drift_rate = [x[2], x[3] - x[2]];
        let (z, e) = ([x[4], x[5]], [x[6], x[7]]);
        let alpha = self.post_yield_ratio;
        let k = self.stiffness;
        let story = |j: usize| alpha * k * drift[j] + (1.0 - alpha) * k * z[j];
        let (g1, g2) = (story(0), story(1));
        let restoring = [g1 - g2, g2];
        let c = self.damping_matrix();
        out[0] = x[2];
        out[1] = x[3];
        for i in 0..2 {
            let damping = c[i][0] * x[2] + c[i][1] * x[3];
            out[2 + i] = -u - (damping + restoring[i]) / self.mass;
        }
        for j in 0..2 {
            out[4 + j] = self.hysteretic_rate(drift_rate[j], z[j], e[j]);
            out[6 + j] = drift_rate[j] * z[j];
        }
    }
    fn parameters(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or_default()
    }
}
