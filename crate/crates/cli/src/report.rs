use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

/// JSON has no infinities; non-finite reals are written as the strings
/// `"inf"`, `"-inf"` and `"nan"`.
pub mod nonfinite {
    use serde::de::Deserializer;
    use serde::ser::Serializer;
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v.is_finite() {
            Repr::Num(v)
        } else if v.is_nan() {
            Repr::Text("nan".into())
        } else if v > 0.0 {
            Repr::Text("inf".into())
        } else {
            Repr::Text("-inf".into())
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("expected a number, got {other:?}"))),
            },
        }
    }

    pub mod scalar {
        use super::*;

        pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
            to_repr(*v).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
            from_repr(Repr::deserialize(d)?)
        }
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|x| to_repr(*x)).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr).collect()
        }
    }

    pub mod matrix {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
            v.iter()
                .map(|row| row.iter().map(|x| to_repr(*x)).collect::<Vec<_>>())
                .collect::<Vec<_>>()
                .serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
            Vec::<Vec<Repr>>::deserialize(d)?
                .into_iter()
                .map(|row| row.into_iter().map(from_repr).collect())
                .collect()
        }
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub generate_s: f64,
    pub train_s: f64,
    pub evaluate_s: f64,
    pub narx_s: f64,
}

/// Accuracy and sparsity of one S2K experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: ExperimentConfig,
    /// `ε_i` per test history (rows) and state (columns); divergent
    /// emulations are `+∞`.
    #[serde(with = "nonfinite::matrix")]
    pub epsilon: Vec<Vec<f64>>,
    /// Mean `ε_i` over the test histories that did not diverge.
    #[serde(with = "nonfinite::vec")]
    pub mean_epsilon: Vec<f64>,
    /// Median `ε_i` over all test histories, divergent ones included.
    #[serde(with = "nonfinite::vec")]
    pub median_epsilon: Vec<f64>,
    pub divergent_tests: Vec<usize>,
    pub pool_size: usize,
    pub sample_sizes: Vec<usize>,
    /// Selected fraction of the pool per component.
    pub sparsity: Vec<f64>,
    pub converged: Vec<bool>,
    pub timings: Timings,
    pub narx: Option<NarxMetrics>,
}

/// NARX accuracy on the first state, paired with an S2K report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarxMetrics {
    /// `ε₁` per test history; `+∞` where the free run diverged.
    #[serde(with = "nonfinite::vec")]
    pub epsilon_1: Vec<f64>,
    #[serde(with = "nonfinite::scalar")]
    pub mean_epsilon_1: f64,
    #[serde(with = "nonfinite::scalar")]
    pub median_epsilon_1: f64,
    pub divergent_tests: Vec<usize>,
    pub n_terms: usize,
    pub warnings: Vec<String>,
}

/// Per-run summaries of a repetition study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatReport {
    pub base: ExperimentConfig,
    pub runs: Vec<MetricsReport>,
}

impl RepeatReport {
    /// Per-run mean `ε_i` of state `i`.
    pub fn mean_epsilon(&self, state: usize) -> Vec<f64> {
        self.runs.iter().map(|r| r.mean_epsilon[state]).collect()
    }

    pub fn narx_mean_epsilon_1(&self) -> Option<Vec<f64>> {
        self.runs.iter().map(|r| r.narx.as_ref().map(|n| n.mean_epsilon_1)).collect()
    }
}

impl MetricsReport {
    /// Plain-text console summary.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{} | n_train {} | sigma {} | pool {} | {} tests ({} divergent)\n",
            self.config.benchmark,
            self.config.n_train,
            self.config.sigma,
            self.pool_size,
            self.epsilon.len(),
            self.divergent_tests.len()
        );
        s.push_str("state  samples  sparsity   mean eps    median eps\n");
        for i in 0..self.sample_sizes.len() {
            s.push_str(&format!(
                "{:>5}  {:>7}  {:>7.3}%  {:>10.3e}  {:>10.3e}\n",
                i + 1,
                self.sample_sizes[i],
                100.0 * self.sparsity[i],
                self.mean_epsilon[i],
                self.median_epsilon[i]
            ));
        }
        if let Some(n) = &self.narx {
            s.push_str(&format!(
                "narx   {:>7} terms        {:>10.3e}  {:>10.3e}  ({} divergent)\n",
                n.n_terms,
                n.mean_epsilon_1,
                n.median_epsilon_1,
                n.divergent_tests.len()
            ));
        }
        s.push_str(&format!(
            "time: generate {:.1}s, train {:.1}s, evaluate {:.1}s",
            self.timings.generate_s, self.timings.train_s, self.timings.evaluate_s
        ));
        if self.narx.is_some() {
            s.push_str(&format!(", narx {:.1}s", self.timings.narx_s));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Probe {
        #[serde(with = "nonfinite::vec")]
        v: Vec<f64>,
    }

    #[test]
    fn infinities_survive_json() {
        let p = Probe {
            v: vec![1.5, f64::INFINITY, f64::NEG_INFINITY],
        };
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(text, r#"{"v":[1.5,"inf","-inf"]}"#);
        assert_eq!(serde_json::from_str::<Probe>(&text).unwrap(), p);
        assert!(serde_json::from_str::<Probe>(r#"{"v":["big"]}"#).is_err());
    }
}
