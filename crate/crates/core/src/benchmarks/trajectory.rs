use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, S2kError};
use crate::excitation::ExcitationRealization;
use crate::linalg::RowMatrix;

/// A sampled response history on an equidistant grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `N_t × n` states.
    pub states: RowMatrix,
    /// `N_t × n` right-hand side values at the stored states.
    pub derivatives: RowMatrix,
    /// Excitation value at each time.
    pub excitation: Vec<f64>,
    pub excitation_manifest: Option<ExcitationRealization>,
}

/// Equidistant grid `t_i = i·dt`, `i = 0..=T/dt`.
pub fn time_grid(dt: f64, duration: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite() && duration > 0.0 && duration.is_finite()) {
        return Err(S2kError::invalid("dt and duration must be positive"));
    }
    let steps = (duration / dt).round();
    if (steps * dt - duration).abs() > 1e-9 * duration {
        return Err(S2kError::invalid("duration must be a multiple of dt"));
    }
    Ok((0..=steps as usize).map(|i| i as f64 * dt).collect())
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states.ncols()
    }

    pub fn state_series(&self, component: usize) -> Vec<f64> {
        self.states.column(component)
    }

    pub fn header(n: usize) -> Vec<String> {
        let mut h = vec!["t".to_string(), "u".to_string()];
        h.extend((1..=n).map(|i| format!("x_{i}")));
        h.extend((1..=n).map(|i| format!("y_{i}")));
        h
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let n = self.state_dim();
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::header(n))?;
        let mut rec: Vec<String> = Vec::with_capacity(2 + 2 * n);
        for j in 0..self.len() {
            rec.clear();
            rec.push(format!("{:.16e}", self.times[j]));
            rec.push(format!("{:.16e}", self.excitation[j]));
            rec.extend(self.states.row(j).iter().map(|v| format!("{v:.16e}")));
            rec.extend(self.derivatives.row(j).iter().map(|v| format!("{v:.16e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv_to(std::io::BufWriter::new(file))
    }

    /// Reads a trajectory written by [`Trajectory::write_csv`]. The
    /// excitation manifest is not part of the CSV and comes back as `None`.
    pub fn read_csv_from<R: Read>(reader: R) -> Result<Trajectory> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 4 || header.len() % 2 != 0 || &header[0] != "t" || &header[1] != "u" {
            return Err(S2kError::Format("unexpected trajectory header".into()));
        }
        let n = (header.len() - 2) / 2;
        let mut times = Vec::new();
        let mut excitation = Vec::new();
        let mut states = RowMatrix::with_cols(n);
        let mut derivatives = RowMatrix::with_cols(n);
        let mut row = vec![0.0; 2 * n + 2];
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != row.len() {
                return Err(S2kError::Format("ragged trajectory row".into()));
            }
            for (slot, field) in row.iter_mut().zip(rec.iter()) {
                *slot = field
                    .trim()
                    .parse()
                    .map_err(|e| S2kError::Format(format!("bad number {field:?}: {e}")))?;
            }
            times.push(row[0]);
            excitation.push(row[1]);
            states.push_row(&row[2..2 + n])?;
            derivatives.push_row(&row[2 + n..])?;
        }
        Ok(Trajectory {
            times,
            states,
            derivatives,
            excitation,
            excitation_manifest: None,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Trajectory> {
        Self::read_csv_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
