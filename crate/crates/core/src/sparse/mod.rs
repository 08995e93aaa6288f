//! Compressed sparse row/column storage and the kernels the preconditioner
//! is built from.
//!
//! [`CsrMatrix`] is the working format. [`CscMatrix`] is used for the
//! border blocks that are consumed column by column (the `F_i` blocks and
//! the approximate inverse factors of AINV).

mod io;
mod perm;
mod scale;

pub use io::{read_matrix_market, read_matrix_market_str, write_matrix_market, MatrixMarketError};
pub use perm::{Permutation, PermutationError};
pub use scale::{scale_system, unscale_solution, ScaleError, ScalingPair};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index ({row}, {col}) out of range for a {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("duplicate index {0} in selection")]
    DuplicateIndex(usize),
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
}

/// Row-compressed sparse matrix.
///
/// Column indices inside every row are strictly increasing and no explicit
/// zero is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Column-compressed sparse matrix; row indices inside every column are
/// strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    n_rows: usize,
    n_cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    /// Diagonal matrix; zero entries of `diag` are not stored.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        row_ptr.push(0);
        for (i, &d) in diag.iter().enumerate() {
            if d != 0.0 {
                col_idx.push(i);
                values.push(d);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and entries that end up exactly zero are dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, SparseError> {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(SparseError::IndexOutOfRange {
                    row: r,
                    col: c,
                    n_rows,
                    n_cols,
                });
            }
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let k = next[r];
            cols[k] = c;
            vals[k] = v;
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for i in 0..n_rows {
            let (lo, hi) = (counts[i], counts[i + 1]);
            order.clear();
            order.extend(lo..hi);
            order.sort_by_key(|&k| cols[k]);
            let mut k = 0;
            while k < order.len() {
                let c = cols[order[k]];
                let mut sum = 0.0;
                while k < order.len() && cols[order[k]] == c {
                    sum += vals[order[k]];
                    k += 1;
                }
                if sum != 0.0 {
                    col_idx.push(c);
                    values.push(sum);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Assembles a matrix from raw CSR arrays, sorting each row, summing
    /// duplicate columns and dropping zeros.
    pub fn from_raw_parts(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, SparseError> {
        if row_ptr.len() != n_rows + 1 {
            return Err(SparseError::DimensionMismatch {
                expected: n_rows + 1,
                got: row_ptr.len(),
            });
        }
        if col_idx.len() != values.len() || *row_ptr.last().unwrap_or(&0) != values.len() {
            return Err(SparseError::DimensionMismatch {
                expected: col_idx.len(),
                got: values.len(),
            });
        }
        let mut triplets = Vec::with_capacity(values.len());
        for i in 0..n_rows {
            for k in row_ptr[i]..row_ptr[i + 1] {
                triplets.push((i, col_idx[k], values[k]));
            }
        }
        Self::from_triplets(n_rows, n_cols, &triplets)
    }

    /// Builds a matrix from rows already sorted by column with no duplicates.
    /// Zero values are skipped.
    pub(crate) fn from_sorted_rows<I>(n_rows: usize, n_cols: usize, rows: I) -> Self
    where
        I: IntoIterator,
        I::Item: IntoIterator<Item = (usize, f64)>,
    {
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                debug_assert!(c < n_cols);
                if v != 0.0 {
                    debug_assert!(col_idx.len() == *row_ptr.last().unwrap() || *col_idx.last().unwrap() < c);
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        debug_assert_eq!(row_ptr.len(), n_rows + 1);
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Dense row-major input; zeros are skipped. Intended for small examples.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        Self::from_sorted_rows(
            n_rows,
            n_cols,
            rows.iter()
                .map(|r| r.iter().copied().enumerate().collect::<Vec<_>>()),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, SparseError> {
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<(), SparseError> {
        if x.len() != self.n_cols {
            return Err(SparseError::DimensionMismatch {
                expected: self.n_cols,
                got: x.len(),
            });
        }
        if y.len() != self.n_rows {
            return Err(SparseError::DimensionMismatch {
                expected: self.n_rows,
                got: y.len(),
            });
        }
        self.spmv_unchecked(x, y);
        Ok(())
    }

    pub(crate) fn spmv_unchecked(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut s = 0.0;
            for k in lo..hi {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    /// `y += alpha * A x` without dimension checks.
    pub(crate) fn spmv_add_unchecked(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            if lo == hi {
                continue;
            }
            let mut s = 0.0;
            for k in lo..hi {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi += alpha * s;
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let csc = self.to_csc();
        CsrMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr: csc.col_ptr,
            col_idx: csc.row_idx,
            values: csc.values,
        }
    }

    pub fn to_csc(&self) -> CscMatrix {
        let mut col_ptr = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            col_ptr[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut next = col_ptr.clone();
        let mut row_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col_idx[k];
                row_idx[next[c]] = i;
                values[next[c]] = self.values[k];
                next[c] += 1;
            }
        }
        CscMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// `result(i, j) = A(rows[i], cols[j])`.
    pub fn extract_submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<CsrMatrix, SparseError> {
        let mut col_map = vec![usize::MAX; self.n_cols];
        for (jn, &c) in cols.iter().enumerate() {
            if c >= self.n_cols {
                return Err(SparseError::IndexOutOfRange {
                    row: 0,
                    col: c,
                    n_rows: self.n_rows,
                    n_cols: self.n_cols,
                });
            }
            if col_map[c] != usize::MAX {
                return Err(SparseError::DuplicateIndex(c));
            }
            col_map[c] = jn;
        }
        let mut seen = vec![false; self.n_rows];
        for &r in rows {
            if r >= self.n_rows {
                return Err(SparseError::IndexOutOfRange {
                    row: r,
                    col: 0,
                    n_rows: self.n_rows,
                    n_cols: self.n_cols,
                });
            }
            if std::mem::replace(&mut seen[r], true) {
                return Err(SparseError::DuplicateIndex(r));
            }
        }
        Ok(self.extract_with_map(rows, &col_map, cols.len()))
    }

    /// Submatrix extraction given a precomputed column map
    /// (`col_map[old] = new` or `usize::MAX`).
    pub(crate) fn extract_with_map(&self, rows: &[usize], col_map: &[usize], n_cols: usize) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut buf: Vec<(usize, f64)> = Vec::new();
        for &r in rows {
            buf.clear();
            let (cs, vs) = self.row(r);
            for (&c, &v) in cs.iter().zip(vs) {
                let jn = col_map[c];
                if jn != usize::MAX {
                    buf.push((jn, v));
                }
            }
            buf.sort_unstable_by_key(|e| e.0);
            for &(c, v) in &buf {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n_rows: rows.len(),
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Symmetric permutation `Pᵀ A P`: entry `(i, j)` of the result is
    /// `A(perm.old_of(i), perm.old_of(j))`.
    pub fn permute(&self, perm: &Permutation) -> Result<CsrMatrix, SparseError> {
        if !self.is_square() {
            return Err(SparseError::NotSquare(self.n_rows, self.n_cols));
        }
        if perm.len() != self.n_rows {
            return Err(SparseError::DimensionMismatch {
                expected: self.n_rows,
                got: perm.len(),
            });
        }
        Ok(self.extract_with_map(perm.forward(), perm.inverse(), self.n_cols))
    }

    /// Drops stored entries with `|a_ij| < tol`; the diagonal is kept when
    /// `keep_diagonal` is set.
    pub fn drop_small(&self, tol: f64, keep_diagonal: bool) -> CsrMatrix {
        Self::from_sorted_rows(
            self.n_rows,
            self.n_cols,
            (0..self.n_rows).map(|i| {
                let (c, v) = self.row(i);
                c.iter()
                    .zip(v)
                    .filter(|(&j, &x)| x.abs() >= tol || (keep_diagonal && i == j))
                    .map(|(&j, &x)| (j, x))
                    .collect::<Vec<_>>()
            }),
        )
    }

    pub fn scale_rows_cols(&self, row_scale: &[f64], col_scale: &[f64]) -> CsrMatrix {
        let mut out = self.clone();
        for i in 0..self.n_rows {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                out.values[k] *= row_scale[i] * col_scale[out.col_idx[k]];
            }
        }
        out
    }

    /// `A + B` of equal shape.
    pub fn add(&self, other: &CsrMatrix) -> Result<CsrMatrix, SparseError> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(SparseError::DimensionMismatch {
                expected: self.n_rows * self.n_cols,
                got: other.n_rows * other.n_cols,
            });
        }
        Ok(Self::from_sorted_rows(
            self.n_rows,
            self.n_cols,
            (0..self.n_rows).map(|i| merge_rows(self.row(i), other.row(i), 1.0)),
        ))
    }

    /// `true` when the sparsity pattern equals the pattern of the transpose.
    pub fn is_structurally_symmetric(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        let t = self.transpose();
        t.row_ptr == self.row_ptr && t.col_idx == self.col_idx
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && self.transpose() == *self
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Dense row-major copy; for small matrices and test oracles only.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, j, v) in self.iter() {
            d[i][j] = v;
        }
        d
    }

    /// Checks the storage invariants; used by tests and debug assertions.
    pub fn check_invariants(&self) -> bool {
        self.row_ptr.len() == self.n_rows + 1
            && self.row_ptr[0] == 0
            && *self.row_ptr.last().unwrap() == self.values.len()
            && self.col_idx.len() == self.values.len()
            && (0..self.n_rows).all(|i| {
                let (c, v) = self.row(i);
                c.windows(2).all(|w| w[0] < w[1])
                    && c.iter().all(|&j| j < self.n_cols)
                    && v.iter().all(|&x| x != 0.0)
            })
    }
}

fn merge_rows(a: (&[usize], &[f64]), b: (&[usize], &[f64]), beta: f64) -> Vec<(usize, f64)> {
    let (ac, av) = a;
    let (bc, bv) = b;
    let mut out = Vec::with_capacity(ac.len() + bc.len());
    let (mut p, mut q) = (0, 0);
    while p < ac.len() || q < bc.len() {
        if q == bc.len() || (p < ac.len() && ac[p] < bc[q]) {
            out.push((ac[p], av[p]));
            p += 1;
        } else if p == ac.len() || bc[q] < ac[p] {
            out.push((bc[q], beta * bv[q]));
            q += 1;
        } else {
            out.push((ac[p], av[p] + beta * bv[q]));
            p += 1;
            q += 1;
        }
    }
    out
}

impl CscMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Row indices and values of column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn col_nnz(&self, j: usize) -> usize {
        self.col_ptr[j + 1] - self.col_ptr[j]
    }

    /// Indices of columns holding at least one entry.
    pub fn nonzero_cols(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_cols).filter(move |&j| self.col_ptr[j + 1] > self.col_ptr[j])
    }

    pub fn to_csr(&self) -> CsrMatrix {
        // the transpose of a CSC matrix shares its arrays with a CSR matrix
        let t = CsrMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr: self.col_ptr.clone(),
            col_idx: self.row_idx.clone(),
            values: self.values.clone(),
        };
        t.transpose()
    }

    /// Builds from columns already sorted by row; zeros are skipped.
    pub(crate) fn from_sorted_cols<I>(n_rows: usize, n_cols: usize, cols: I) -> Self
    where
        I: IntoIterator,
        I::Item: IntoIterator<Item = (usize, f64)>,
    {
        let t = CsrMatrix::from_sorted_rows(n_cols, n_rows, cols);
        CscMatrix {
            n_rows,
            n_cols,
            col_ptr: t.row_ptr,
            row_idx: t.col_idx,
            values: t.values,
        }
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, SparseError> {
        if x.len() != self.n_cols {
            return Err(SparseError::DimensionMismatch {
                expected: self.n_cols,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.n_rows];
        self.spmv_add_unchecked(1.0, x, &mut y);
        Ok(y)
    }

    /// `y += alpha * A x`.
    pub(crate) fn spmv_add_unchecked(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let s = alpha * xj;
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[k]] += self.values[k] * s;
            }
        }
    }

    /// `y = Aᵀ x`.
    pub(crate) fn spmv_transpose_unchecked(&self, x: &[f64], y: &mut [f64]) {
        for (j, yj) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                s += self.values[k] * x[self.row_idx[k]];
            }
            *yj = s;
        }
    }
}

impl From<&CsrMatrix> for CscMatrix {
    fn from(a: &CsrMatrix) -> Self {
        a.to_csc()
    }
}
