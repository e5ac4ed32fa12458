//! Sparse state-space Kriging (S2K) surrogates.
//!
//! The crate learns the right-hand side `ẋ = f(x, u)` of a dynamical system
//! from sampled trajectories, one sparse Kriging model per state component,
//! and emulates new response histories by integrating the learned
//! right-hand side. A polynomial NARX baseline and four benchmark systems
//! are included for comparison studies.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod active_learning;
pub mod benchmarks;
pub mod emulator;
pub mod error;
pub mod excitation;
pub mod integrate;
pub mod kriging;
pub mod linalg;
pub mod metrics;
pub mod narx;
pub mod pattern_search;
pub mod pool;
pub mod seeds;

pub use active_learning::{ActiveLearningConfig, SelectionTrace};
pub use benchmarks::{Benchmark, DynamicalSystem, Trajectory};
pub use emulator::{EnsemblePrediction, PredictionMode, S2KModel};
pub use error::{Result, S2kError};
pub use excitation::{Excitation, ExcitationRealization};
pub use kriging::{KrigingConfig, KrigingModel};
pub use linalg::RowMatrix;
pub use pattern_search::{SearchConfig, SearchResult};
pub use pool::TrainingPool;
