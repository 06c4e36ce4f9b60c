//! Dense row-major tables over the `K × K'` support grid.
//!
//! All grid-valued objects (couplings, cost tables, reference weights, basis
//! rows) share this layout, and its serde form is the wire format used by the
//! JSON interfaces: explicit shape fields plus a flat row-major array.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("data length {len} does not match shape {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
    #[error("shapes differ: {0}x{1} vs {2}x{3}")]
    IncompatibleShapes(usize, usize, usize, usize),
}

/// Row-major `rows × cols` table of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Table {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Table { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TableError> {
        if data.len() != rows * cols {
            return Err(TableError::ShapeMismatch { rows, cols, len: data.len() });
        }
        Ok(Table { rows, cols, data })
    }

    /// Build from nested rows; panics on ragged input (test/fixture helper).
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Table { rows: r, cols: c, data }
    }

    pub fn fill(rows: usize, cols: usize, value: f64) -> Self {
        Table { rows, cols, data: vec![value; rows * cols] }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &Table) -> Result<(), TableError> {
        if self.shape() != other.shape() {
            return Err(TableError::IncompatibleShapes(
                self.rows,
                self.cols,
                other.rows,
                other.cols,
            ));
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j] += self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Table {
        Table {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Entrywise `self + scale * other`.
    pub fn add_scaled(&self, other: &Table, scale: f64) -> Result<Table, TableError> {
        self.same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + scale * b)
            .collect();
        Ok(Table { rows: self.rows, cols: self.cols, data })
    }

    pub fn max_abs_diff(&self, other: &Table) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checked_construction() {
        assert!(Table::from_vec(2, 2, vec![1.0; 3]).is_err());
        let t = Table::from_vec(2, 3, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(t.get(1, 2), 5.0);
        assert_eq!(t.row_sums(), vec![3.0, 12.0]);
        assert_eq!(t.col_sums(), vec![3.0, 5.0, 7.0]);
    }

    #[test]
    fn serde_round_trip_keeps_shape() {
        let t = Table::from_rows(&[vec![0.25, 0.5], vec![0.125, 0.125]]);
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"rows\":2"));
        assert!(json.contains("\"cols\":2"));
        let back: Table = serde_json::from_str(&json).unwrap();
        assert_eq!(t, back);
    }
}
