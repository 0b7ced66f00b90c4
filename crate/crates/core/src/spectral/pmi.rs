use nalgebra::DMatrix;

use crate::cooccur::CooccurrenceCounts;
use crate::error::{Error, Result};

/// Dense PMI values with a mask of the cells that were computed from a
/// positive count. Unobserved cells hold `0.0` in `values` and are treated
/// as `-∞` (they truncate to zero) by [`PmiMatrix::shifted_truncated`].
#[derive(Debug, Clone, PartialEq)]
pub struct PmiMatrix {
    pub values: DMatrix<f64>,
    pub observed: DMatrix<bool>,
    /// Constant added to every cell before taking logs.
    pub smoothing: f64,
}

impl PmiMatrix {
    /// Wraps an arbitrary matrix with every cell observed.
    pub fn from_dense(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::Shape(format!("{}x{} PMI matrix", values.nrows(), values.ncols())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("PMI values".into()));
        }
        let observed = DMatrix::from_element(values.nrows(), values.ncols(), true);
        Ok(Self { values, observed, smoothing: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(M + τ)₊`, with unobserved cells mapped to zero.
    pub fn shifted_truncated(&self, tau: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.len(), |i, j| {
            if self.observed[(i, j)] {
                (self.values[(i, j)] + tau).max(0.0)
            } else {
                0.0
            }
        })
    }
}

/// `M_ij = log C_ij - log R_i - log S_j + log T` over the positive cells,
/// with `R`, `S` the row and column sums and `T` the total.
pub fn pmi_matrix(counts: &CooccurrenceCounts) -> Result<PmiMatrix> {
    pmi_from_dense(&counts.to_dense(), 0.0)
}

/// PMI of `counts + smoothing` (every cell observed when `smoothing > 0`).
pub fn pmi_matrix_smoothed(counts: &CooccurrenceCounts, smoothing: f64) -> Result<PmiMatrix> {
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(Error::InvalidConfig(format!("smoothing must be non-negative, got {smoothing}")));
    }
    pmi_from_dense(&counts.to_dense(), smoothing)
}

pub fn pmi_from_dense(c: &DMatrix<f64>, smoothing: f64) -> Result<PmiMatrix> {
    let n = c.nrows();
    if n != c.ncols() {
        return Err(Error::Shape(format!("{n}x{} count matrix", c.ncols())));
    }
    if c.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Format("counts must be finite and non-negative".into()));
    }
    let c = c.add_scalar(smoothing);
    let rows: Vec<f64> = (0..n).map(|i| c.row(i).sum()).collect();
    let cols: Vec<f64> = (0..n).map(|j| c.column(j).sum()).collect();
    if let Some(i) = rows.iter().position(|&r| r <= 0.0) {
        return Err(Error::EmptyRowOrColumn(i));
    }
    if let Some(j) = cols.iter().position(|&s| s <= 0.0) {
        return Err(Error::EmptyRowOrColumn(j));
    }
    let log_total = rows.iter().sum::<f64>().ln();
    let log_rows: Vec<f64> = rows.iter().map(|r| r.ln()).collect();
    let log_cols: Vec<f64> = cols.iter().map(|s| s.ln()).collect();
    let observed = c.map(|v| v > 0.0);
    let values = DMatrix::from_fn(n, n, |i, j| {
        let v = c[(i, j)];
        if v > 0.0 {
            v.ln() - log_rows[i] - log_cols[j] + log_total
        } else {
            0.0
        }
    });
    Ok(PmiMatrix { values, observed, smoothing })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independence_gives_zero() {
        let m = pmi_from_dense(&DMatrix::from_element(4, 4, 3.5), 0.0).unwrap();
        assert!(m.values.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn two_by_two_values() {
        let m = pmi_from_dense(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]), 0.0).unwrap();
        assert!((m.values[(0, 0)] - (4.0f64 / 3.0).ln()).abs() < 1e-14);
        assert!((m.values[(0, 1)] - (2.0f64 / 3.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn empty_row_is_named() {
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(pmi_from_dense(&c, 0.0), Err(Error::EmptyRowOrColumn(2))));
        assert!(pmi_from_dense(&c, 0.5).is_ok());
    }

    #[test]
    fn zero_cells_truncate_to_zero() {
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 3.0, 1.0]);
        let m = pmi_from_dense(&c, 0.0).unwrap();
        assert!(!m.observed[(0, 0)]);
        assert_eq!(m.shifted_truncated(100.0)[(0, 0)], 0.0);
        assert!(m.shifted_truncated(100.0)[(0, 1)] > 0.0);
    }
}
