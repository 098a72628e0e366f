//! Row-major dense matrices and the small dense kernels used on projected
//! problems.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::math;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    /// Panics if the rows are ragged.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        DenseMatrix { rows: r, cols: c, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        DenseMatrix { rows, cols, data }
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[f64]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            if xi != 0.0 {
                axpy(xi, self.row(i), &mut y);
            }
        }
        y
    }

    pub fn mul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a != 0.0 {
                    let src = other.row(k);
                    let dst = out.row_mut(i);
                    axpy(a, src, dst);
                }
            }
        }
        out
    }

    /// `selfᵀ self`
    pub fn gram(&self) -> DenseMatrix {
        let n = self.cols;
        let mut g = DenseMatrix::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                let a = row[i];
                if a == 0.0 {
                    continue;
                }
                for j in i..n {
                    g.data[i * n + j] += a * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g.data[i * n + j] = g.data[j * n + i];
            }
        }
        g
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, s: f64, other: &DenseMatrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        axpy(s, &other.data, &mut self.data);
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        DenseMatrix { rows: idx.len(), cols: self.cols, data }
    }

    pub fn select_cols(&self, idx: &[usize]) -> DenseMatrix {
        Self::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])])
    }

    pub fn vstack(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        DenseMatrix { rows: self.rows + other.rows, cols: self.cols, data }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Induced ∞-norm (largest absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn symmetrize(&mut self) {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = m;
                self.data[j * n + i] = m;
            }
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    math::sqrt(dot(x, x))
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matrix whose columns are eigenvectors.
pub fn symmetric_eigen(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    assert_eq!(a.rows(), a.cols());
    let n = a.rows();
    let mut m = a.clone();
    m.symmetrize();
    let mut v = DenseMatrix::identity(n);
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if math::sqrt(off) <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + math::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals = (0..n).map(|i| m[(i, i)]).collect();
    (vals, v)
}

/// Householder QR with column pivoting. Holds enough to extract rank, an
/// orthonormal nullspace basis of the original matrix and least-squares
/// solutions.
pub struct PivotedQr {
    /// Packed R (upper part) and Householder vectors (below diagonal).
    qr: DenseMatrix,
    tau: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    pub fn new(a: &DenseMatrix, rel_tol: f64) -> Self {
        let (m, n) = (a.rows(), a.cols());
        let mut qr = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut norms: Vec<f64> = (0..n).map(|j| (0..m).map(|i| qr[(i, j)] * qr[(i, j)]).sum()).collect();
        let kmax = m.min(n);
        let mut tau = vec![0.0; kmax];
        let mut rank = 0;
        let mut first = None;
        for k in 0..kmax {
            // recompute remaining column norms for robustness
            for j in k..n {
                norms[j] = (k..m).map(|i| qr[(i, j)] * qr[(i, j)]).sum();
            }
            let (jmax, nmax) = (k..n).map(|j| (j, norms[j])).fold((k, -1.0), |b, c| if c.1 > b.1 { c } else { b });
            let nrm = math::sqrt(nmax.max(0.0));
            let r0 = *first.get_or_insert(nrm);
            if nrm <= rel_tol * r0.max(f64::MIN_POSITIVE) || nrm == 0.0 {
                break;
            }
            if jmax != k {
                for i in 0..m {
                    let t = qr[(i, k)];
                    qr[(i, k)] = qr[(i, jmax)];
                    qr[(i, jmax)] = t;
                }
                perm.swap(k, jmax);
                norms.swap(k, jmax);
            }
            let alpha = qr[(k, k)];
            let beta = if alpha >= 0.0 { -nrm } else { nrm };
            let v0 = alpha - beta;
            for i in (k + 1)..m {
                qr[(i, k)] /= v0;
            }
            tau[k] = (beta - alpha) / beta;
            qr[(k, k)] = beta;
            for j in (k + 1)..n {
                let mut s = qr[(k, j)];
                for i in (k + 1)..m {
                    s += qr[(i, k)] * qr[(i, j)];
                }
                s *= tau[k];
                qr[(k, j)] -= s;
                for i in (k + 1)..m {
                    let h = qr[(i, k)];
                    qr[(i, j)] -= s * h;
                }
            }
            rank = k + 1;
        }
        PivotedQr { qr, tau, perm, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Nullspace of the factored matrix from `[−R₁⁻¹R₂; I]`, orthonormalized.
    pub fn nullspace(&self) -> DenseMatrix {
        let n = self.qr.cols();
        let r = self.rank;
        let k = n - r;
        let mut z = DenseMatrix::zeros(n, k);
        for c in 0..k {
            let mut y = vec![0.0; n];
            y[r + c] = 1.0;
            for i in (0..r).rev() {
                let mut s = self.qr[(i, r + c)];
                for j in (i + 1)..r {
                    s += self.qr[(i, j)] * y[j];
                }
                y[i] = -s / self.qr[(i, i)];
            }
            for (j, &p) in self.perm.iter().enumerate() {
                z[(p, c)] = y[j];
            }
        }
        orthonormalize_columns(&mut z);
        z
    }
}

/// Modified Gram-Schmidt (two passes) on the columns, dropping nothing.
pub fn orthonormalize_columns(z: &mut DenseMatrix) {
    let (n, k) = (z.rows(), z.cols());
    for c in 0..k {
        for _ in 0..2 {
            for p in 0..c {
                let mut s = 0.0;
                for i in 0..n {
                    s += z[(i, p)] * z[(i, c)];
                }
                for i in 0..n {
                    let zp = z[(i, p)];
                    z[(i, c)] -= s * zp;
                }
            }
        }
        let nrm = math::sqrt((0..n).map(|i| z[(i, c)] * z[(i, c)]).sum::<f64>());
        if nrm > 0.0 {
            for i in 0..n {
                z[(i, c)] /= nrm;
            }
        }
    }
}

/// Orthonormal nullspace basis of `a` via pivoted QR of `aᵀ`.
pub fn dense_nullspace(a: &DenseMatrix, rel_tol: f64) -> DenseMatrix {
    let n = a.cols();
    if a.rows() == 0 {
        return DenseMatrix::identity(n);
    }
    // QR of aᵀ (n × m): aᵀ P = Q R; null(a) = trailing columns of Q.
    let at = a.transpose();
    let f = PivotedQr::new(&at, rel_tol);
    let r = f.rank();
    let mut z = DenseMatrix::zeros(n, n - r);
    for c in 0..(n - r) {
        let mut e = vec![0.0; n];
        e[r + c] = 1.0;
        // apply Q = H0 H1 ... H_{r-1} to e
        for k in (0..r).rev() {
            let mut s = e[k];
            for i in (k + 1)..n {
                s += f.qr[(i, k)] * e[i];
            }
            s *= f.tau[k];
            e[k] -= s;
            for i in (k + 1)..n {
                e[i] -= s * f.qr[(i, k)];
            }
        }
        z.set_column(c, &e);
    }
    z
}

/// Numerical rank via pivoted QR.
pub fn dense_rank(a: &DenseMatrix, rel_tol: f64) -> usize {
    if a.rows() == 0 || a.cols() == 0 {
        return 0;
    }
    PivotedQr::new(a, rel_tol).rank()
}

/// Row-pivoted LU factor of a square matrix, reusable across right-hand sides.
#[derive(Clone, Debug)]
pub struct DenseLu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl DenseLu {
    /// `None` on an exactly zero pivot.
    pub fn new(a: &DenseMatrix) -> Option<Self> {
        let n = a.rows();
        assert_eq!(n, a.cols());
        let mut m = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, v) = (k..n).map(|i| (i, m[(i, k)].abs())).fold((k, -1.0), |b, c| if c.1 > b.1 { c } else { b });
            if v == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    let t = m[(k, j)];
                    m[(k, j)] = m[(p, j)];
                    m[(p, j)] = t;
                }
                perm.swap(k, p);
            }
            let pivot = m[(k, k)];
            for i in (k + 1)..n {
                let f = m[(i, k)] / pivot;
                m[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        let mk = m[(k, j)];
                        m[(i, j)] -= f * mk;
                    }
                }
            }
        }
        Some(DenseLu { lu: m, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in 0..i {
                s -= row[j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= row[j] * x[j];
            }
            x[i] = s / row[i];
        }
        x
    }
}

/// Gaussian elimination with partial pivoting for a square system. `None` on
/// an exactly zero pivot.
pub fn dense_solve(a: &DenseMatrix, b: &[f64]) -> Option<Vec<f64>> {
    DenseLu::new(a).map(|f| f.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_matches_explicit_product() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let g = a.gram();
        let e = a.transpose().mul(&a);
        assert_eq!(g, e);
    }

    #[test]
    fn jacobi_diagonalizes() {
        let a = DenseMatrix::from_rows(&[&[4.0, 1.0, 0.0], &[1.0, 3.0, 1.0], &[0.0, 1.0, 2.0]]);
        let (vals, v) = symmetric_eigen(&a);
        let mut rec = DenseMatrix::zeros(3, 3);
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    rec[(i, j)] += vals[k] * v[(i, k)] * v[(j, k)];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                assert!((rec[(i, j)] - a[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nullspace_of_row() {
        let a = DenseMatrix::from_rows(&[&[1.0, 1.0]]);
        let z = dense_nullspace(&a, 1e-12);
        assert_eq!(z.cols(), 1);
        assert!((z[(0, 0)] + z[(1, 0)]).abs() < 1e-14);
    }

    #[test]
    fn rank_of_dependent_rows() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(dense_rank(&a, 1e-12), 1);
    }

    #[test]
    fn qr_nullspace_via_r() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0, 3.0], &[0.0, 1.0, 1.0]]);
        let f = PivotedQr::new(&a, 1e-12);
        let z = f.nullspace();
        assert_eq!(z.cols(), 1);
        let r = a.mul(&z);
        assert!(r.max_abs() < 1e-12);
    }
}
