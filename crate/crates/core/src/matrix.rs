//! Dense row-major `f32` matrix used for every embedding table in the crate.

use serde::{Deserialize, Serialize};

/// A row-major `rows × dim` matrix of `f32`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embeddings {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl Embeddings {
    /// An empty matrix that still remembers its row width.
    pub fn empty(dim: usize) -> Self {
        Self { rows: 0, dim, data: Vec::new() }
    }

    /// Wraps a flat row-major buffer. Returns `None` when the length does not
    /// factor as `rows * dim`.
    pub fn from_flat(rows: usize, dim: usize, data: Vec<f32>) -> Option<Self> {
        (rows.checked_mul(dim)? == data.len()).then_some(Self { rows, dim, data })
    }

    /// Builds a matrix from row vectors; `None` on ragged input or no rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Option<Self> {
        let dim = rows.first()?.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return None;
            }
            data.extend_from_slice(r);
        }
        Some(Self { rows: rows.len(), dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    /// Appends a row. Panics if the width differs.
    pub fn push_row(&mut self, row: &[f32]) {
        assert_eq!(row.len(), self.dim, "row width mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_rows_rejected() {
        assert!(Embeddings::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_none());
        assert!(Embeddings::from_rows::<Vec<f32>>(&[]).is_none());
    }

    #[test]
    fn flat_layout_is_row_major() {
        let m = Embeddings::from_flat(2, 3, vec![0., 1., 2., 3., 4., 5.]).unwrap();
        assert_eq!(m.row(1), &[3., 4., 5.]);
        assert!(Embeddings::from_flat(2, 3, vec![0.; 5]).is_none());
    }
}
