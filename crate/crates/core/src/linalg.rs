//! Small dense linear-algebra kernels used by the Kriging and NARX code.
//!
//! Matrices are row-major. The Cholesky factor is stored as a row-packed
//! lower triangle so that growing the factor by one row (sequential
//! enrichment) is an append.

use serde::{Deserialize, Serialize};

use crate::error::{Result, S2kError};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RowMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RowMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// An empty matrix with a fixed column count, to be filled with [`push_row`](Self::push_row).
    pub fn with_cols(cols: usize) -> Self {
        RowMatrix {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(S2kError::invalid(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(RowMatrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut m = RowMatrix::with_cols(cols);
        for r in rows {
            m.push_row(r.as_ref())?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.cols {
            return Err(S2kError::invalid(format!(
                "row has {} entries, matrix has {} columns",
                row.len(),
                self.cols
            )));
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    /// Appends all rows of `other` (same column count).
    pub fn extend(&mut self, other: &RowMatrix) -> Result<()> {
        if other.cols != self.cols {
            return Err(S2kError::invalid("column count mismatch in extend"));
        }
        self.data.extend_from_slice(&other.data);
        self.rows += other.rows;
        Ok(())
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn rows_iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + Clone {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> RowMatrix {
        let mut out = RowMatrix::with_cols(self.cols);
        out.data.reserve(indices.len() * self.cols);
        for &i in indices {
            out.data.extend_from_slice(self.row(i));
        }
        out.rows = indices.len();
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four accumulators let the compiler vectorize without reassociating
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`, stored row-packed.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedCholesky {
    n: usize,
    packed: Vec<f64>,
}

#[inline]
fn row_offset(i: usize) -> usize {
    i * (i + 1) / 2
}

impl PackedCholesky {
    pub fn empty() -> Self {
        PackedCholesky {
            n: 0,
            packed: Vec::new(),
        }
    }

    /// Factorizes the symmetric matrix whose lower-triangle entries are
    /// produced by `entry(i, j)` for `j <= i`. Returns `None` when a pivot is
    /// not safely positive.
    pub fn factor(n: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Option<Self> {
        let mut chol = PackedCholesky {
            n: 0,
            packed: Vec::with_capacity(row_offset(n)),
        };
        let mut row = vec![0.0; n];
        for i in 0..n {
            for (j, r) in row.iter_mut().enumerate().take(i) {
                *r = entry(i, j);
            }
            if !chol.append(&row[..i], entry(i, i)) {
                return None;
            }
        }
        Some(chol)
    }

    /// Extends the factor of `A` to the factor of `[[A, c], [cᵀ, d]]`.
    /// Returns `false` (leaving `self` untouched) if the new pivot is not
    /// safely positive.
    pub fn append(&mut self, coupling: &[f64], diag: f64) -> bool {
        debug_assert_eq!(coupling.len(), self.n);
        let n = self.n;
        let start = self.packed.len();
        self.packed.extend_from_slice(coupling);
        // forward substitution in place on the new row
        for j in 0..n {
            let (head, new_row) = self.packed.split_at_mut(start);
            let lj = &head[row_offset(j)..row_offset(j) + j + 1];
            let s = new_row[j] - dot(&new_row[..j], &lj[..j]);
            new_row[j] = s / lj[j];
        }
        let new_row = &self.packed[start..];
        let pivot = diag - dot(new_row, new_row);
        if !(pivot.is_finite() && pivot > f64::EPSILON * diag.abs()) {
            self.packed.truncate(start);
            return false;
        }
        self.packed.push(pivot.sqrt());
        self.n += 1;
        true
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Row `i` of `L`, entries `0..=i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.packed[row_offset(i)..row_offset(i) + i + 1]
    }

    #[inline]
    pub fn diag(&self, i: usize) -> f64 {
        self.packed[row_offset(i) + i]
    }

    /// Solves `L x = b`.
    pub fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward_solve_in_place(&mut x);
        x
    }

    pub fn forward_solve_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let li = self.row(i);
            let s = x[i] - dot(&li[..i], &x[..i]);
            x[i] = s / li[i];
        }
    }

    /// Solves `Lᵀ x = b`.
    pub fn backward_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        for i in (0..self.n).rev() {
            x[i] /= self.diag(i);
            let xi = x[i];
            let li = self.row(i);
            for (xk, lik) in x[..i].iter_mut().zip(&li[..i]) {
                *xk -= lik * xi;
            }
        }
        x
    }

    /// Solves `A x = b` with `A = L Lᵀ`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward_solve(&self.forward_solve(b))
    }

    /// `ln det A = 2 Σ ln Lᵢᵢ`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.diag(i).ln()).sum::<f64>()
    }

    /// Dense copy of `L` (row-major, upper part zero).
    pub fn to_dense(&self) -> RowMatrix {
        let mut m = RowMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            m.row_mut(i)[..=i].copy_from_slice(self.row(i));
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_two_by_two_by_hand() {
        // [[4, 2], [2, 3]] -> L = [[2, 0], [1, sqrt(2)]]
        let a = [[4.0, 2.0], [2.0, 3.0]];
        let l = PackedCholesky::factor(2, |i, j| a[i][j]).unwrap();
        assert_eq!(l.row(0), &[2.0]);
        assert_eq!(l.row(1)[0], 1.0);
        assert!((l.diag(1) - 2f64.sqrt()).abs() < 1e-15);
        assert!((l.log_det() - 8f64.ln()).abs() < 1e-14);
        let x = l.solve(&[2.0, 1.0]);
        // A x = b  ->  x = [0.5, 0]
        assert!((x[0] - 0.5).abs() < 1e-15 && x[1].abs() < 1e-15);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = [[1.0, 2.0], [2.0, 1.0]];
        assert!(PackedCholesky::factor(2, |i, j| a[i][j]).is_none());
    }

    #[test]
    fn failed_append_leaves_factor_unchanged() {
        let mut l = PackedCholesky::factor(1, |_, _| 1.0).unwrap();
        assert!(!l.append(&[1.0], 1.0));
        assert_eq!(l.dim(), 1);
        assert!(l.append(&[0.5], 1.0));
        assert_eq!(l.dim(), 2);
    }

    #[test]
    fn row_matrix_shape_checks() {
        let mut m = RowMatrix::with_cols(2);
        m.push_row(&[1.0, 2.0]).unwrap();
        assert!(m.push_row(&[1.0]).is_err());
        assert_eq!(m.column(1), vec![2.0]);
        assert!(RowMatrix::from_vec(2, 2, vec![0.0; 3]).is_err());
    }
}
