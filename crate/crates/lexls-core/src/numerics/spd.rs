//! Dense Cholesky factor for symmetric positive-definite systems.

use alloc::vec::Vec;

use super::dense::DenseMatrix;
use super::sparse::SparseMatrix;
use crate::{math, Error};

/// Lower Cholesky factor `C = L·Lᵀ`, packed row-major.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    n: usize,
    l: DenseMatrix,
}

impl SpdFactor {
    pub fn new(c: &DenseMatrix) -> Result<Self, Error> {
        assert_eq!(c.rows(), c.cols());
        let n = c.rows();
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = c[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { index: j });
            }
            let djj = math::sqrt(d);
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = c[(i, j)];
                let (li, lj) = (l.row(i), l.row(j));
                for k in 0..j {
                    s -= li[k] * lj[k];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(SpdFactor { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Smallest diagonal entry of the factor.
    pub fn min_pivot(&self) -> f64 {
        (0..self.n).map(|i| self.l[(i, i)]).fold(f64::INFINITY, f64::min)
    }

    pub fn lower(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.n);
        let mut y = r.to_vec();
        for i in 0..self.n {
            let row = self.l.row(i);
            let mut s = y[i];
            for k in 0..i {
                s -= row[k] * y[k];
            }
            y[i] = s / row[i];
        }
        for i in (0..self.n).rev() {
            let mut s = y[i];
            for k in (i + 1)..self.n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }
}

pub fn factor_spd(c: &SparseMatrix) -> Result<SpdFactor, Error> {
    SpdFactor::new(&c.to_dense())
}

pub fn solve_spd(f: &SpdFactor, r: &[f64]) -> Vec<f64> {
    f.solve(r)
}
