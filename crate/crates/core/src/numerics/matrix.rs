use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Dense real matrix whose entries are all finite.
///
/// Storage is delegated to `nalgebra`; the public surface speaks row-major
/// (`from_row_major`, `row`, serialized `values`).
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix(DMatrix<f64>);

impl Matrix {
    pub fn from_row_major(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows * cols != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, &values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} values, expected {cols}",
                r.len()
            )));
        }
        let values = rows.iter().flatten().copied().collect();
        Self::from_row_major(rows.len(), cols, values)
    }

    pub fn from_columns(nrows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        if let Some((j, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != nrows) {
            return Err(Error::DimensionMismatch(format!(
                "column {j} has {} values, expected {nrows}",
                c.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_fn(nrows, columns.len(), |i, j| columns[j][i]))
    }

    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        let ncols = m.ncols();
        if let Some(idx) = m.iter().position(|v| !v.is_finite()) {
            // column-major index
            return Err(Error::NonFinite {
                row: idx % m.nrows().max(1),
                col: (idx / m.nrows().max(1)).min(ncols.saturating_sub(1)),
            });
        }
        Ok(Matrix(m))
    }

    /// Wraps a matrix produced by finite arithmetic on finite inputs.
    pub(crate) fn from_dmatrix_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert!(m.iter().all(|v| v.is_finite()));
        Matrix(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix(DMatrix::zeros(rows, cols))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.0.nrows();
        &self.0.as_slice()[j * n..(j + 1) * n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.nrows()).map(|i| self.row(i)).collect()
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        Matrix(self.0.select_rows(rows))
    }

    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        Matrix(self.0.select_columns(cols))
    }

    /// Horizontal concatenation. All parts must share a row count; an empty
    /// list yields a `rows`x0 matrix.
    pub fn hstack(rows: usize, parts: &[&Matrix]) -> Result<Matrix> {
        let cols: usize = parts.iter().map(|m| m.ncols()).sum();
        let mut out = DMatrix::zeros(rows, cols);
        let mut at = 0;
        for m in parts {
            if m.nrows() != rows {
                return Err(Error::DimensionMismatch(format!(
                    "hstack: part has {} rows, expected {rows}",
                    m.nrows()
                )));
            }
            out.columns_mut(at, m.ncols()).copy_from(&m.0);
            at += m.ncols();
        }
        Ok(Matrix(out))
    }

    pub fn scale(&self, factor: f64) -> Result<Matrix> {
        Matrix::from_dmatrix(&self.0 * factor)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix(self.0.transpose())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.ncols() != other.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "matmul: {}x{} times {}x{}",
                self.nrows(),
                self.ncols(),
                other.nrows(),
                other.ncols()
            )));
        }
        Matrix::from_dmatrix(&self.0 * &other.0)
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.nrows() as f64;
        (0..self.ncols())
            .map(|j| self.column(j).iter().sum::<f64>() / n)
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRepr {
            rows: self.nrows(),
            cols: self.ncols(),
            values: self.to_row_major(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MatrixRepr::deserialize(d)?;
        Matrix::from_row_major(r.rows, r.cols, r.values).map_err(serde::de::Error::custom)
    }
}
