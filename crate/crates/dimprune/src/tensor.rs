//! Minimal dense row-major matrix of f64 values.
//!
//! All model arithmetic runs in double precision so that the exact-zero and
//! bit-reproducibility guarantees elsewhere in the crate hold without
//! tolerance fudging. The type is deliberately small: the crate needs
//! matrix-vector products, row/column selection, and elementwise edits, not
//! a general linear-algebra library.

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero matrix of the given shape.
    #[must_use]
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix by evaluating `f(row, col)` at every position.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Wraps an existing row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Input(format!(
                "buffer of {} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    #[must_use]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[must_use]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[must_use]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Total number of stored values.
    #[must_use]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[must_use]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    /// Borrows one row as a slice.
    #[must_use]
    pub fn row(&self, r: usize) -> &[f64] {
        debug_assert!(r < self.rows);
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        debug_assert!(r < self.rows);
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Raw row-major buffer.
    #[must_use]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Matrix-vector product `y = A x` with `x.len() == cols`.
    #[must_use]
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (w, xv) in row.iter().zip(x) {
                acc += w * xv;
            }
            y[r] = acc;
        }
        y
    }

    /// Multiplies every entry in place.
    pub fn scale_in_place(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn zero_column(&mut self, c: usize) {
        debug_assert!(c < self.cols);
        for r in 0..self.rows {
            self.data[r * self.cols + c] = 0.0;
        }
    }

    pub fn zero_row(&mut self, r: usize) {
        for v in self.row_mut(r) {
            *v = 0.0;
        }
    }

    pub fn scale_column(&mut self, c: usize, factor: f64) {
        debug_assert!(c < self.cols);
        for r in 0..self.rows {
            self.data[r * self.cols + c] *= factor;
        }
    }

    pub fn scale_row(&mut self, r: usize, factor: f64) {
        for v in self.row_mut(r) {
            *v *= factor;
        }
    }

    /// New matrix keeping only the listed columns, in the given order.
    #[must_use]
    pub fn select_columns(&self, keep: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, keep.len());
        for r in 0..self.rows {
            for (i, &c) in keep.iter().enumerate() {
                out.data[r * keep.len() + i] = self.get(r, c);
            }
        }
        out
    }

    /// New matrix keeping only the listed rows, in the given order.
    #[must_use]
    pub fn select_rows(&self, keep: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(keep.len(), self.cols);
        for (i, &r) in keep.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(r));
        }
        out
    }

    /// Sum of absolute values down column `c`.
    #[must_use]
    pub fn abs_column_sum(&self, c: usize) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.rows {
            acc += self.get(r, c).abs();
        }
        acc
    }

    /// Sum of absolute values across row `r`.
    #[must_use]
    pub fn abs_row_sum(&self, r: usize) -> f64 {
        self.row(r).iter().map(|v| v.abs()).sum()
    }

    /// Largest absolute entry, 0.0 for an empty matrix.
    #[must_use]
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute elementwise difference against `other`.
    ///
    /// Shapes must match; use this only for same-shape comparisons in tests
    /// and reports.
    #[must_use]
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}
