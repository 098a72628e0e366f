//! Dense strictly convex QP by the dual active-set method of Goldfarb and
//! Idnani: `min ½xᵀHx + cᵀx` subject to `A x ≥ b`.

use alloc::vec;
use alloc::vec::Vec;

use super::dense::DenseMatrix;
use super::spd::SpdFactor;
use crate::math;

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Indices of the rows of `A` active at the solution.
    pub active: Vec<usize>,
    /// Nonnegative multipliers of `active`, in the same order.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpError {
    NotPositiveDefinite,
    Infeasible,
    IterationLimit,
}

fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let h = math::sqrt(a * a + b * b);
    if h == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / h, b / h, h)
    }
}

/// `J` columns `i` and `j` rotated by `(c, s)`.
fn rotate_cols(j: &mut DenseMatrix, a: usize, b: usize, c: f64, s: f64) {
    for r in 0..j.rows() {
        let (x, y) = (j[(r, a)], j[(r, b)]);
        j[(r, a)] = c * x + s * y;
        j[(r, b)] = -s * x + c * y;
    }
}

struct Work {
    /// `J = L⁻ᵀQ`; the first `q` columns span the active normals.
    j: DenseMatrix,
    /// Upper triangular, `Jᵀ N = [R; 0]` for the active normals `N`.
    r: DenseMatrix,
    active: Vec<usize>,
    u: Vec<f64>,
}

impl Work {
    fn q(&self) -> usize {
        self.active.len()
    }

    fn drop(&mut self, k: usize) {
        let q = self.q();
        for col in k..q - 1 {
            for row in 0..q {
                self.r[(row, col)] = self.r[(row, col + 1)];
            }
        }
        for row in 0..q {
            self.r[(row, q - 1)] = 0.0;
        }
        for jj in k..q - 1 {
            let (c, s, h) = givens(self.r[(jj, jj)], self.r[(jj + 1, jj)]);
            if h == 0.0 {
                continue;
            }
            for col in jj..q - 1 {
                let (x, y) = (self.r[(jj, col)], self.r[(jj + 1, col)]);
                self.r[(jj, col)] = c * x + s * y;
                self.r[(jj + 1, col)] = -s * x + c * y;
            }
            self.r[(jj + 1, jj)] = 0.0;
            rotate_cols(&mut self.j, jj, jj + 1, c, s);
        }
        self.active.remove(k);
        self.u.remove(k);
    }

    fn add(&mut self, p: usize, mut d: Vec<f64>, u_p: f64) {
        let q = self.q();
        let n = d.len();
        for jj in (q + 1..n).rev() {
            let (c, s, h) = givens(d[jj - 1], d[jj]);
            if h == 0.0 {
                continue;
            }
            d[jj - 1] = h;
            d[jj] = 0.0;
            rotate_cols(&mut self.j, jj - 1, jj, c, s);
        }
        for row in 0..=q {
            self.r[(row, q)] = d[row];
        }
        self.active.push(p);
        self.u.push(u_p);
    }

    /// `R⁻¹ d[..q]`.
    fn back_solve(&self, d: &[f64]) -> Vec<f64> {
        let q = self.q();
        let mut r = vec![0.0; q];
        for i in (0..q).rev() {
            let mut s = d[i];
            for k in (i + 1)..q {
                s -= self.r[(i, k)] * r[k];
            }
            r[i] = s / self.r[(i, i)];
        }
        r
    }
}

/// Solves the QP with `H` symmetric positive definite. `tol` bounds the
/// accepted constraint violation relative to the row norm.
pub fn dual_active_set_qp(
    h: &DenseMatrix,
    c: &[f64],
    a: &DenseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<QpSolution, QpError> {
    let n = h.rows();
    let m = a.rows();
    assert_eq!(c.len(), n);
    assert_eq!(b.len(), m);
    let l = SpdFactor::new(h).map_err(|_| QpError::NotPositiveDefinite)?;
    // J = L⁻ᵀ, column by column from Lᵀ J = I
    let lower = l.lower();
    let mut j = DenseMatrix::zeros(n, n);
    for col in 0..n {
        for i in (0..=col).rev() {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in (i + 1)..=col {
                s -= lower[(k, i)] * j[(k, col)];
            }
            j[(i, col)] = s / lower[(i, i)];
        }
    }
    let jtc = j.tr_mul_vec(c);
    let mut x: Vec<f64> = j.mul_vec(&jtc).into_iter().map(|v| -v).collect();
    let norms: Vec<f64> = (0..m).map(|i| math::sqrt(a.row(i).iter().map(|v| v * v).sum())).collect();
    let mut w = Work { j, r: DenseMatrix::zeros(n, n), active: Vec::new(), u: Vec::new() };
    let mut is_active = vec![false; m];
    let mut iterations = 0;
    loop {
        let mut p = usize::MAX;
        let mut worst = -tol;
        for i in 0..m {
            if is_active[i] || norms[i] == 0.0 {
                continue;
            }
            let s: f64 = a.row(i).iter().zip(&x).map(|(ai, xi)| ai * xi).sum::<f64>() - b[i];
            let sn = s / norms[i];
            if sn < worst {
                worst = sn;
                p = i;
            }
        }
        if p == usize::MAX {
            break;
        }
        let np = a.row(p);
        let mut u_p = 0.0;
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(QpError::IterationLimit);
            }
            let q = w.q();
            let d = w.j.tr_mul_vec(np);
            let z: Vec<f64> = (0..n).map(|row| (q..n).map(|k| w.j[(row, k)] * d[k]).sum()).collect();
            let r = w.back_solve(&d);
            let mut t1 = f64::INFINITY;
            let mut k_drop = usize::MAX;
            for k in 0..q {
                if r[k] > 0.0 {
                    let t = w.u[k] / r[k];
                    if t < t1 {
                        t1 = t;
                        k_drop = k;
                    }
                }
            }
            let dd: f64 = d.iter().map(|v| v * v).sum();
            let zn: f64 = d[q..].iter().map(|v| v * v).sum();
            let s_p: f64 = np.iter().zip(&x).map(|(ai, xi)| ai * xi).sum::<f64>() - b[p];
            let t2 = if zn > 1e-14 * dd { -s_p / zn } else { f64::INFINITY };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(QpError::Infeasible);
            }
            for k in 0..q {
                w.u[k] -= t * r[k];
            }
            u_p += t;
            if t2.is_finite() {
                for (xi, zi) in x.iter_mut().zip(&z) {
                    *xi += t * zi;
                }
            }
            if t == t2 {
                let d = w.j.tr_mul_vec(np);
                w.add(p, d, u_p);
                is_active[p] = true;
                break;
            }
            is_active[w.active[k_drop]] = false;
            w.drop(k_drop);
        }
    }
    let multipliers = w.u.iter().map(|v| v.max(0.0)).collect();
    Ok(QpSolution { x, active: w.active, multipliers, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_minimum() {
        let h = DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 4.0]]);
        let sol = dual_active_set_qp(&h, &[-2.0, -4.0], &DenseMatrix::zeros(0, 2), &[], 1e-12, 100).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-14 && (sol.x[1] - 1.0).abs() < 1e-14);
        assert!(sol.active.is_empty());
    }

    #[test]
    fn projection_onto_halfplane() {
        // min ½‖x − (1, 1)‖² s.t. −x₀ − x₁ ≥ 0 → (0, 0), multiplier 1
        let h = DenseMatrix::identity(2);
        let a = DenseMatrix::from_rows(&[&[-1.0, -1.0]]);
        let sol = dual_active_set_qp(&h, &[-1.0, -1.0], &a, &[0.0], 1e-12, 100).unwrap();
        assert!(sol.x.iter().all(|v| v.abs() < 1e-14));
        assert_eq!(sol.active, vec![0]);
        assert!((sol.multipliers[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn duplicate_rows_are_handled() {
        // the same bound three times, plus an inactive one
        let h = DenseMatrix::identity(2);
        let a = DenseMatrix::from_rows(&[&[-1.0, 0.0], &[-1.0, 0.0], &[-2.0, 0.0], &[0.0, 1.0]]);
        let sol = dual_active_set_qp(&h, &[-3.0, 0.0], &a, &[-1.0, -1.0, -2.0, -5.0], 1e-12, 100).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12 && sol.x[1].abs() < 1e-12);
        let total: f64 = sol.active.iter().zip(&sol.multipliers).map(|(&i, u)| -a[(i, 0)] * u).sum();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_is_reported() {
        let h = DenseMatrix::identity(1);
        let a = DenseMatrix::from_rows(&[&[1.0], &[-1.0]]);
        assert_eq!(dual_active_set_qp(&h, &[0.0], &a, &[1.0, 0.0], 1e-12, 100), Err(QpError::Infeasible));
    }
}
