//! Candidate pool of `(state, excitation) → derivative` rows gathered from
//! training trajectories.

use serde::{Deserialize, Serialize};

use crate::benchmarks::{reference_trajectory, DynamicalSystem, Trajectory};
use crate::error::{Result, S2kError};
use crate::excitation::ExcitationRealization;
use crate::linalg::RowMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPool {
    /// `N × (n + 1)` rows `[x, u]`.
    pub inputs: RowMatrix,
    /// `N × n` rows `y = ẋ`.
    pub outputs: RowMatrix,
    pub source_history_id: Vec<usize>,
    pub time_stamp: Vec<f64>,
}

impl TrainingPool {
    pub fn from_trajectories(trajectories: &[Trajectory]) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| S2kError::invalid("at least one trajectory is required"))?;
        let n = first.state_dim();
        let rows: usize = trajectories.iter().map(Trajectory::len).sum();
        let mut inputs = RowMatrix::zeros(rows, n + 1);
        let mut outputs = RowMatrix::zeros(rows, n);
        let mut source_history_id = Vec::with_capacity(rows);
        let mut time_stamp = Vec::with_capacity(rows);
        let mut r = 0;
        for (id, tr) in trajectories.iter().enumerate() {
            if tr.state_dim() != n {
                return Err(S2kError::invalid("trajectories have different state dimensions"));
            }
            for j in 0..tr.len() {
                let row = inputs.row_mut(r);
                row[..n].copy_from_slice(tr.states.row(j));
                row[n] = tr.excitation[j];
                outputs.row_mut(r).copy_from_slice(tr.derivatives.row(j));
                source_history_id.push(id);
                time_stamp.push(tr.times[j]);
                r += 1;
            }
        }
        let pool = TrainingPool {
            inputs,
            outputs,
            source_history_id,
            time_stamp,
        };
        pool.validate()?;
        Ok(pool)
    }

    pub fn validate(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(S2kError::invalid("the pool needs at least two rows"));
        }
        if self.outputs.nrows() != self.len() || self.inputs.ncols() != self.outputs.ncols() + 1 {
            return Err(S2kError::invalid("pool inputs and outputs are inconsistent"));
        }
        if !self.inputs.all_finite() || !self.outputs.all_finite() {
            return Err(S2kError::invalid("pool contains non-finite values"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state_dim(&self) -> usize {
        self.outputs.ncols()
    }

    /// `(min, max)` of each state column over the pool.
    pub fn state_ranges(&self) -> Vec<(f64, f64)> {
        (0..self.state_dim())
            .map(|c| {
                self.inputs
                    .rows_iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[c]), hi.max(r[c])))
            })
            .collect()
    }
}

/// Integrates `system` under each excitation from rest and pools the
/// samples. Returns the pool and the trajectories it came from.
pub fn generate_training_pool(
    system: &dyn DynamicalSystem,
    excitations: &[ExcitationRealization],
    dt: f64,
    duration: f64,
) -> Result<(TrainingPool, Vec<Trajectory>)> {
    use rayon::prelude::*;
    if excitations.is_empty() {
        return Err(S2kError::invalid("at least one excitation is required"));
    }
    let x0 = vec![0.0; system.state_dim()];
    let trajectories = excitations
        .par_iter()
        .map(|e| reference_trajectory(system, e, &x0, dt, duration))
        .collect::<Result<Vec<_>>>()?;
    let pool = TrainingPool::from_trajectories(&trajectories)?;
    Ok((pool, trajectories))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::Duffing;
    use crate::excitation::sample_spectral;

    #[test]
    fn pool_sizes_and_ids() {
        let sys = Duffing::default();
        let ex: Vec<_> = (0..2).map(|s| sample_spectral(0.1, 150, 1.0, s).unwrap()).collect();
        let (pool, trs) = generate_training_pool(&sys, &ex, 0.002, 1.0).unwrap();
        assert_eq!(pool.len(), 1002);
        assert_eq!(pool.inputs.ncols(), 3);
        assert_eq!(pool.source_history_id.iter().filter(|&&i| i == 1).count(), 501);
        assert_eq!(pool.inputs.row(501)[..2], trs[1].states.row(0)[..]);
        assert_eq!(pool.inputs.row(700)[2], trs[1].excitation[199]);
        assert_eq!(pool.outputs.row(700), trs[1].derivatives.row(199));
        assert_eq!(pool.time_stamp[700], trs[1].times[199]);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(generate_training_pool(&Duffing::default(), &[], 0.002, 1.0).is_err());
        assert!(TrainingPool::from_trajectories(&[]).is_err());
    }
}
