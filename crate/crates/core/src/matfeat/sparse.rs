use serde::{Deserialize, Serialize};

use super::{MatfeatError, Result};

/// Symmetry declared in the file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    General,
    Symmetric,
}

/// Real sparse matrix in compressed-row form. Column indices are sorted within
/// each row, duplicates are summed and exact zeros are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetry: Symmetry,
}

impl SparseMatrix {
    /// Assembles a matrix from 0-based (row, col, value) triplets.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(MatfeatError::EmptyDimensions);
        }
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        if let Some(&(row, col, _)) = entries.iter().find(|(r, c, _)| *r >= n_rows || *c >= n_cols) {
            return Err(MatfeatError::IndexOutOfRange { row: row + 1, col: col + 1, n_rows, n_cols });
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut i = 0;
        while i < entries.len() {
            let (r, c, mut v) = entries[i];
            i += 1;
            while i < entries.len() && entries[i].0 == r && entries[i].1 == c {
                v += entries[i].2;
                i += 1;
            }
            if v != 0.0 {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self { n_rows, n_cols, row_ptr, col_idx, values, symmetry: Symmetry::General })
    }

    pub fn with_symmetry(mut self, symmetry: Symmetry) -> Self {
        self.symmetry = symmetry;
        self
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    /// All stored entries as 0-based triplets in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (i, j, v) in self.triplets() {
            let dst = next[j];
            col_idx[dst] = i;
            values[dst] = v;
            next[j] += 1;
        }
        Self { n_rows: self.n_cols, n_cols: self.n_rows, row_ptr, col_idx, values, symmetry: self.symmetry }
    }

    /// Diagonal entries (square part).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    /// Returns `P A P^T` where row/column `i` moves to `perm[i]`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Result<Self> {
        assert_eq!(perm.len(), self.n_rows, "permutation length");
        Self::from_triplets(self.n_rows, self.n_cols, self.triplets().map(|(i, j, v)| (perm[i], perm[j], v)))
    }

    /// Multiplies every stored value by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        if c == 0.0 {
            let empty = Self::from_triplets(self.n_rows, self.n_cols, std::iter::empty()).expect("positive dims");
            return empty.with_symmetry(self.symmetry);
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }
}
