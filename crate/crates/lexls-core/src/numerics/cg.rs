//! Conjugate gradients on the normal equations of `Aᵀλ ≈ b`.

use alloc::vec;
use alloc::vec::Vec;

use super::dense::{axpy, dot, norm2};
use super::lu::{solve_lower, solve_lower_transpose};
use super::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CgStatus {
    Converged,
    NotConverged,
}

#[derive(Clone, Debug)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub status: CgStatus,
    pub iterations: usize,
    /// Final `‖A(b − Aᵀλ)‖ / ‖A b‖`.
    pub relative_residual: f64,
}

/// Preconditioner `M = Pᵀ L Lᵀ P` from the lower factor of an LU of `A`
/// with row permutation `P`.
#[derive(Clone, Debug)]
pub struct TriangularPrecond {
    pub lower: SparseMatrix,
    pub row_perm: Vec<usize>,
    pub unit: bool,
}

impl TriangularPrecond {
    fn apply_inverse(&self, r: &[f64]) -> Vec<f64> {
        let pr: Vec<f64> = self.row_perm.iter().map(|&i| r[i]).collect();
        let y = solve_lower(&self.lower, &pr, self.unit).expect("nonsingular preconditioner");
        let z = solve_lower_transpose(&self.lower, &y, self.unit).expect("nonsingular preconditioner");
        let mut out = vec![0.0; r.len()];
        for (k, &i) in self.row_perm.iter().enumerate() {
            out[i] = z[k];
        }
        out
    }
}

/// Minimizes `‖Aᵀλ − b‖₂` starting from `λ = 0`.
pub fn cg_least_squares(
    a: &SparseMatrix,
    b: &[f64],
    precond: Option<&TriangularPrecond>,
    tol: f64,
    max_iter: usize,
) -> CgResult {
    assert!(tol > 0.0);
    assert_eq!(b.len(), a.cols());
    let m = a.rows();
    let mut x = vec![0.0; m];
    let rhs = a.mul_vec(b);
    let rhs_norm = norm2(&rhs);
    if max_iter == 0 {
        return CgResult { x, status: CgStatus::NotConverged, iterations: 0, relative_residual: 1.0 };
    }
    if rhs_norm == 0.0 {
        return CgResult { x, status: CgStatus::Converged, iterations: 0, relative_residual: 0.0 };
    }
    let normal = |v: &[f64]| a.mul_vec(&a.tr_mul_vec(v));
    let prec = |v: &[f64]| match precond {
        Some(p) => p.apply_inverse(v),
        None => v.to_vec(),
    };
    let mut r = rhs.clone();
    let mut z = prec(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for it in 1..=max_iter {
        let ap = normal(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return CgResult { x, status: CgStatus::NotConverged, iterations: it, relative_residual: rel };
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        rel = norm2(&r) / rhs_norm;
        if rel <= tol {
            return CgResult { x, status: CgStatus::Converged, iterations: it, relative_residual: rel };
        }
        z = prec(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    CgResult { x, status: CgStatus::NotConverged, iterations: max_iter, relative_residual: rel }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::dense::DenseMatrix;

    #[test]
    fn identity_returns_rhs() {
        let b = [1.5, -2.0, 0.25];
        let res = cg_least_squares(&SparseMatrix::identity(3), &b, None, 1e-12, 10);
        assert_eq!(res.status, CgStatus::Converged);
        for i in 0..3 {
            assert!((res.x[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_iterations_keep_initial_guess() {
        let res = cg_least_squares(&SparseMatrix::identity(2), &[1.0, 1.0], None, 1e-12, 0);
        assert_eq!(res.status, CgStatus::NotConverged);
        assert_eq!(res.x, vec![0.0, 0.0]);
    }

    #[test]
    fn preconditioned_matches_plain() {
        let a = SparseMatrix::from_dense(&DenseMatrix::from_rows(&[&[2.0, 1.0, 0.0, 1.0], &[0.0, 3.0, 1.0, 0.0]]), 0.0);
        let b = [1.0, 2.0, 3.0, 4.0];
        let plain = cg_least_squares(&a, &b, None, 1e-13, 50);
        let l = SparseMatrix::from_dense(&DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.5, 1.0]]), 0.0);
        let p = TriangularPrecond { lower: l, row_perm: vec![0, 1], unit: true };
        let pre = cg_least_squares(&a, &b, Some(&p), 1e-13, 50);
        for i in 0..2 {
            assert!((plain.x[i] - pre.x[i]).abs() < 1e-10);
        }
    }
}
