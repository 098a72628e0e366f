//! Compressed sparse column storage.

use alloc::vec;
use alloc::vec::Vec;

use super::dense::DenseMatrix;

/// CSC matrix. Row indices within a column are strictly increasing, so no
/// (row, col) pair is stored twice.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix { rows, cols, col_ptr: vec![0; cols + 1], row_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix { rows: n, cols: n, col_ptr: (0..=n).collect(), row_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    /// Builds from unordered triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, trip: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = trip.to_vec();
        for &(r, c, _) in &sorted {
            assert!(r < rows && c < cols, "triplet ({r},{c}) out of bounds {rows}x{cols}");
        }
        sorted.sort_by_key(|t| (t.1, t.0));
        let mut col_ptr = vec![0usize; cols + 1];
        let mut row_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(r);
                values.push(v);
                col_ptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..cols {
            col_ptr[c + 1] += col_ptr[c];
        }
        SparseMatrix { rows, cols, col_ptr, row_idx, values }
    }

    /// Entries with `|a| <= drop_tol` are not stored.
    pub fn from_dense(a: &DenseMatrix, drop_tol: f64) -> Self {
        let mut col_ptr = Vec::with_capacity(a.cols() + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for j in 0..a.cols() {
            for i in 0..a.rows() {
                let v = a[(i, j)];
                if v.abs() > drop_tol {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        SparseMatrix { rows: a.rows(), cols: a.cols(), col_ptr, row_idx, values }
    }

    /// Columns given as sparse (row, value) lists with increasing rows.
    pub fn from_columns(rows: usize, columns: &[Vec<(usize, f64)>]) -> Self {
        let mut col_ptr = Vec::with_capacity(columns.len() + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for col in columns {
            let mut prev = None;
            for &(r, v) in col {
                assert!(r < rows);
                assert!(prev.is_none_or(|p| r > p), "column rows must increase");
                prev = Some(r);
                row_idx.push(r);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        SparseMatrix { rows, cols: columns.len(), col_ptr, row_idx, values }
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
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[s..e], &self.values[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (ri, vals) = self.col(j);
        match ri.binary_search(&i) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.cols).flat_map(move |j| {
            let (ri, v) = self.col(j);
            ri.iter().zip(v).map(move |(&i, &x)| (i, j, x))
        })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for j in 0..self.cols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let (ri, v) = self.col(j);
            for (&i, &a) in ri.iter().zip(v) {
                y[i] += a * xj;
            }
        }
        y
    }

    /// `selfᵀ x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        (0..self.cols)
            .map(|j| {
                let (ri, v) = self.col(j);
                ri.iter().zip(v).map(|(&i, &a)| a * x[i]).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    pub fn transpose(&self) -> SparseMatrix {
        let t: Vec<(usize, usize, f64)> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        SparseMatrix::from_triplets(self.cols, self.rows, &t)
    }

    /// `self * b` for dense `b`.
    pub fn mul_dense(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, b.rows());
        let mut out = DenseMatrix::zeros(self.rows, b.cols());
        for j in 0..self.cols {
            let (ri, v) = self.col(j);
            let brow = b.row(j);
            for (&i, &a) in ri.iter().zip(v) {
                let dst = out.row_mut(i);
                for (d, s) in dst.iter_mut().zip(brow) {
                    *d += a * s;
                }
            }
        }
        out
    }

    /// Sparse product `self * b`.
    pub fn mul_sparse(&self, b: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.cols, b.rows);
        let mut acc = vec![0.0; self.rows];
        let mut mark = vec![usize::MAX; self.rows];
        let mut columns = Vec::with_capacity(b.cols);
        for j in 0..b.cols {
            let mut pattern = Vec::new();
            let (bri, bv) = b.col(j);
            for (&k, &bk) in bri.iter().zip(bv) {
                let (ari, av) = self.col(k);
                for (&i, &a) in ari.iter().zip(av) {
                    if mark[i] != j {
                        mark[i] = j;
                        acc[i] = 0.0;
                        pattern.push(i);
                    }
                    acc[i] += a * bk;
                }
            }
            pattern.sort_unstable();
            columns.push(pattern.into_iter().map(|i| (i, acc[i])).collect::<Vec<_>>());
        }
        SparseMatrix::from_columns(self.rows, &columns)
    }

    pub fn select_rows(&self, idx: &[usize]) -> SparseMatrix {
        let mut map = vec![usize::MAX; self.rows];
        for (k, &i) in idx.iter().enumerate() {
            map[i] = k;
        }
        let mut trip = Vec::new();
        for (i, j, v) in self.triplets() {
            if map[i] != usize::MAX {
                trip.push((map[i], j, v));
            }
        }
        // rows may be selected more than once
        if idx.len() != idx.iter().collect::<alloc::collections::BTreeSet<_>>().len() {
            trip.clear();
            for (k, &i) in idx.iter().enumerate() {
                for j in 0..self.cols {
                    let v = self.get(i, j);
                    if v != 0.0 {
                        trip.push((k, j, v));
                    }
                }
            }
        }
        SparseMatrix::from_triplets(idx.len(), self.cols, &trip)
    }

    pub fn select_cols(&self, idx: &[usize]) -> SparseMatrix {
        let columns: Vec<Vec<(usize, f64)>> = idx
            .iter()
            .map(|&j| {
                let (ri, v) = self.col(j);
                ri.iter().copied().zip(v.iter().copied()).collect()
            })
            .collect();
        SparseMatrix::from_columns(self.rows, &columns)
    }

    pub fn vstack(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.cols, other.cols);
        let mut trip: Vec<_> = self.triplets().collect();
        trip.extend(other.triplets().map(|(i, j, v)| (i + self.rows, j, v)));
        SparseMatrix::from_triplets(self.rows + other.rows, self.cols, &trip)
    }

    pub fn hstack(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.rows, other.rows);
        let mut trip: Vec<_> = self.triplets().collect();
        trip.extend(other.triplets().map(|(i, j, v)| (i, j + self.cols, v)));
        SparseMatrix::from_triplets(self.rows, self.cols + other.cols, &trip)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Induced ∞-norm (largest absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        let mut s = vec![0.0; self.rows];
        for (i, _, v) in self.triplets() {
            s[i] += v.abs();
        }
        s.into_iter().fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Smallest and largest row index of column `j`, if any entry is stored.
    pub fn col_support(&self, j: usize) -> Option<(usize, usize)> {
        let (ri, _) = self.col(j);
        Some((*ri.first()?, *ri.last()?))
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out
    }

    /// Dense `selfᵀ·self`.
    pub fn gram(&self) -> DenseMatrix {
        let t = self.transpose();
        let mut g = DenseMatrix::zeros(self.cols, self.cols);
        for r in 0..t.cols() {
            let (ci, cv) = t.col(r);
            for (&i, &a) in ci.iter().zip(cv) {
                for (&j, &b) in ci.iter().zip(cv) {
                    g[(i, j)] += a * b;
                }
            }
        }
        g
    }

    /// Drops stored entries with `|a| <= tol`.
    pub fn pruned(&self, tol: f64) -> SparseMatrix {
        let columns: Vec<Vec<(usize, f64)>> = (0..self.cols)
            .map(|j| {
                let (ri, v) = self.col(j);
                ri.iter().copied().zip(v.iter().copied()).filter(|(_, x)| x.abs() > tol).collect()
            })
            .collect();
        SparseMatrix::from_columns(self.rows, &columns)
    }
}
