//! Compressed sparse row matrices and the sparse-times-dense kernel.
//!
//! Everything downstream (interaction matrix, co-interaction weights, the two
//! normalized propagation inputs) lives in this one representation. Rows are
//! stored with strictly increasing column indices and no explicit zeros, and
//! every kernel accumulates in row-major order so repeated runs are
//! bit-identical.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Sparse matrix in compressed row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// An empty matrix with the given shape.
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// The n x n identity.
    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Build from (row, col, value) triplets. Duplicate coordinates are summed;
    /// entries that are exactly zero after combining are dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (row, col, value) in triplets {
            if row >= n_rows || col >= n_cols {
                return Err(Error::EntryOutOfRange {
                    row,
                    col,
                    n_rows,
                    n_cols,
                });
            }
            entries.push((row, col, value));
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());

        let mut iter = entries.into_iter().peekable();
        while let Some((row, col, mut value)) = iter.next() {
            while let Some(&(r, c, v)) = iter.peek() {
                if r == row && c == col {
                    value += v;
                    iter.next();
                } else {
                    break;
                }
            }
            if value != 0.0 {
                col_indices.push(col);
                values.push(value);
                row_offsets[row + 1] += 1;
            }
        }
        for i in 0..n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }

        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of one row.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    /// Value at (i, j), zero if not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    /// Sum of each row's values.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_rows];
        for i in 0..self.n_rows {
            let (_, vals) = self.row(i);
            sums[i] = vals.iter().sum();
        }
        sums
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &col in &self.col_indices {
            counts[col + 1] += 1;
        }
        for i in 0..self.n_cols {
            counts[i + 1] += counts[i];
        }
        let row_offsets = counts.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut cursor = counts;
        for row in 0..self.n_rows {
            let (cols, vals) = self.row(row);
            for (&col, &val) in cols.iter().zip(vals) {
                let at = cursor[col];
                col_indices[at] = row;
                values[at] = val;
                cursor[col] += 1;
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Sparse-sparse product `self * other`, row by row with a dense
    /// accumulator. Entries that cancel to exactly zero are dropped.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch {
                context: "sparse matmul".into(),
                expected: format!("inner dimension {}", self.n_cols),
                actual: format!("{} rows", other.n_rows),
            });
        }
        let mut row_offsets = vec![0usize; self.n_rows + 1];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut accum = vec![0.0f64; other.n_cols];
        let mut touched: Vec<usize> = Vec::new();

        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&k, &v) in cols.iter().zip(vals) {
                let (other_cols, other_vals) = other.row(k);
                for (&j, &w) in other_cols.iter().zip(other_vals) {
                    if accum[j] == 0.0 && !touched.contains(&j) {
                        touched.push(j);
                    }
                    accum[j] += v * w;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if accum[j] != 0.0 {
                    col_indices.push(j);
                    values.push(accum[j]);
                }
                accum[j] = 0.0;
            }
            touched.clear();
            row_offsets[i + 1] = col_indices.len();
        }

        Ok(SparseMatrix {
            n_rows: self.n_rows,
            n_cols: other.n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Sparse-times-dense product. Accumulation is row-major over the stored
    /// entries of each row, in index order, so results are bit-reproducible.
    pub fn spmm(&self, dense: &Array2<f64>) -> Result<Array2<f64>> {
        if self.n_cols != dense.nrows() {
            return Err(Error::DimensionMismatch {
                context: "spmm".into(),
                expected: format!("dense with {} rows", self.n_cols),
                actual: format!("{} rows", dense.nrows()),
            });
        }
        let width = dense.ncols();
        let mut out = Array2::<f64>::zeros((self.n_rows, width));
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let mut out_row = out.row_mut(i);
            for (&k, &v) in cols.iter().zip(vals) {
                let src = dense.row(k);
                for j in 0..width {
                    out_row[j] += v * src[j];
                }
            }
        }
        Ok(out)
    }

    /// Dense copy, for small matrices and tests.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((self.n_rows, self.n_cols));
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[[i, j]] = v;
            }
        }
        out
    }

    /// Rescale entry (i, j) by `scale[i] * scale[j]`. The per-entry factor is
    /// computed first, so a symmetric input stays exactly symmetric.
    pub fn scale_bilateral(&self, scale: &[f64]) -> SparseMatrix {
        assert_eq!(scale.len(), self.n_rows);
        assert_eq!(self.n_rows, self.n_cols, "bilateral scaling needs a square matrix");
        let mut row_offsets = vec![0usize; self.n_rows + 1];
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let w = v * (scale[i] * scale[j]);
                if w != 0.0 {
                    col_indices.push(j);
                    values.push(w);
                }
            }
            row_offsets[i + 1] = col_indices.len();
        }
        SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Internal consistency check for tests and debug builds.
    pub fn check_invariants(&self) -> Result<()> {
        if self.row_offsets.len() != self.n_rows + 1
            || self.row_offsets[0] != 0
            || *self.row_offsets.last().unwrap() != self.values.len()
            || self.col_indices.len() != self.values.len()
        {
            return Err(Error::InvalidArgument("corrupt CSR offsets".into()));
        }
        for i in 0..self.n_rows {
            if self.row_offsets[i] > self.row_offsets[i + 1] {
                return Err(Error::InvalidArgument("row offsets decrease".into()));
            }
            let (cols, vals) = self.row(i);
            for w in cols.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidArgument(format!(
                        "row {i}: column indices not strictly increasing"
                    )));
                }
            }
            for &c in cols {
                if c >= self.n_cols {
                    return Err(Error::InvalidArgument(format!("row {i}: column {c} out of range")));
                }
            }
            for &v in vals {
                if v == 0.0 {
                    return Err(Error::InvalidArgument(format!("row {i}: explicit zero stored")));
                }
            }
        }
        Ok(())
    }
}

/// Symmetric degree normalization: with `d` the vector of row sums, returns
/// the matrix whose (i, j) entry is `m_ij / sqrt(d_i * d_j)`. Zero-degree
/// vertices use the convention 1/sqrt(0) == 0, which zeroes their rows and
/// columns instead of producing infinities.
pub fn symmetric_normalize(m: &SparseMatrix) -> SparseMatrix {
    let scale: Vec<f64> = m
        .row_sums()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    m.scale_bilateral(&scale)
}
