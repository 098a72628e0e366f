//! Rank-revealing LU with threshold pivoting and triangular solves.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::dense::DenseMatrix;
use super::sparse::SparseMatrix;
use crate::Error;

pub const DEFAULT_PIVOT_TOL: f64 = 1e-10;

/// Below this size in both dimensions the factorization runs on a dense
/// copy with complete pivoting.
pub const DENSE_CUTOFF: usize = 200;

/// Relative floor on triangular diagonals in [`solve_upper`].
pub const PIVOT_FLOOR: f64 = 1e-14;

/// `P·A·Q = L·U` where `L` is unit lower triangular (`m × m`) and `U` is
/// `m × n` upper trapezoidal. Rows `rank..m` of `U` hold the unfactored
/// remainder, whose entries all lie below `pivot_tol · max|A|`.
#[derive(Clone, Debug)]
pub struct PermutedLu {
    /// Row `i` of `P·A` is row `row_perm[i]` of `A`.
    pub row_perm: Vec<usize>,
    /// Column `j` of `A·Q` is column `col_perm[j]` of `A`.
    pub col_perm: Vec<usize>,
    pub lower: SparseMatrix,
    pub upper: SparseMatrix,
    pub rank: usize,
    pub pivot_tol: f64,
}

impl PermutedLu {
    /// `P·A·Q` materialized, for checks.
    pub fn permuted(&self, a: &SparseMatrix) -> SparseMatrix {
        a.select_rows(&self.row_perm).select_cols(&self.col_perm)
    }

    /// Largest elementwise deviation of `L·U` from `P·A·Q`.
    pub fn reconstruction_error(&self, a: &SparseMatrix) -> f64 {
        let lu = self.lower.mul_sparse(&self.upper).to_dense();
        let paq = self.permuted(a).to_dense();
        let mut e = 0.0f64;
        for i in 0..lu.rows() {
            for j in 0..lu.cols() {
                e = e.max((lu[(i, j)] - paq[(i, j)]).abs());
            }
        }
        e
    }
}

pub fn lu_rank_revealing(a: &SparseMatrix, pivot_tol: f64) -> Result<PermutedLu, Error> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::DegenerateMatrix);
    }
    assert!(pivot_tol > 0.0 && pivot_tol < 1.0, "pivot_tol must lie in (0, 1)");
    if a.rows() < DENSE_CUTOFF && a.cols() < DENSE_CUTOFF {
        Ok(dense_lu(&a.to_dense(), pivot_tol))
    } else {
        Ok(sparse_lu(a, pivot_tol))
    }
}

/// Dense path with complete pivoting.
pub fn dense_lu(a: &DenseMatrix, pivot_tol: f64) -> PermutedLu {
    let (m, n) = (a.rows(), a.cols());
    let mut w = a.clone();
    let mut rp: Vec<usize> = (0..m).collect();
    let mut cp: Vec<usize> = (0..n).collect();
    let mut l = DenseMatrix::identity(m);
    let thresh = pivot_tol * a.max_abs();
    let mut rank = 0;
    for k in 0..m.min(n) {
        let mut best = (k, k, -1.0);
        for i in k..m {
            for j in k..n {
                let v = w[(i, j)].abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        let (pi, pj, pv) = best;
        if pv <= thresh || pv == 0.0 {
            break;
        }
        if pi != k {
            for j in 0..n {
                let t = w[(k, j)];
                w[(k, j)] = w[(pi, j)];
                w[(pi, j)] = t;
            }
            for j in 0..k {
                let t = l[(k, j)];
                l[(k, j)] = l[(pi, j)];
                l[(pi, j)] = t;
            }
            rp.swap(k, pi);
        }
        if pj != k {
            for i in 0..m {
                let t = w[(i, k)];
                w[(i, k)] = w[(i, pj)];
                w[(i, pj)] = t;
            }
            cp.swap(k, pj);
        }
        let piv = w[(k, k)];
        for i in (k + 1)..m {
            let f = w[(i, k)] / piv;
            if f == 0.0 {
                continue;
            }
            l[(i, k)] = f;
            w[(i, k)] = 0.0;
            for j in (k + 1)..n {
                let wk = w[(k, j)];
                w[(i, j)] -= f * wk;
            }
        }
        rank = k + 1;
    }
    PermutedLu {
        row_perm: rp,
        col_perm: cp,
        lower: SparseMatrix::from_dense(&l, 0.0),
        upper: SparseMatrix::from_dense(&w, 0.0),
        rank,
        pivot_tol,
    }
}

/// Sparse path: right-looking elimination on row lists with threshold rook
/// pivoting, falling back to a full scan when the rook pivot is below the
/// rank threshold.
fn sparse_lu(a: &SparseMatrix, pivot_tol: f64) -> PermutedLu {
    let (m, n) = (a.rows(), a.cols());
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for (i, j, v) in a.triplets() {
        if v != 0.0 {
            rows[i].push((j, v));
        }
    }
    for r in rows.iter_mut() {
        r.sort_by_key(|e| e.0);
    }
    let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, r) in rows.iter().enumerate() {
        for &(j, _) in r {
            col_rows[j].insert(i);
        }
    }
    let thresh = pivot_tol * a.max_abs();
    let mut row_done = vec![false; m];
    let mut col_done = vec![false; n];
    // pivot sequence and L multipliers in original row numbering
    let mut piv_rows = Vec::new();
    let mut piv_cols = Vec::new();
    let mut lmult: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let mut scratch = vec![0.0; n];
    let mut in_row = vec![false; n];
    let mut rank = 0;

    let row_max = |rows: &Vec<Vec<(usize, f64)>>, i: usize| -> (usize, f64) {
        rows[i].iter().fold((usize::MAX, -1.0), |b, &(j, v)| if v.abs() > b.1 { (j, v.abs()) } else { b })
    };

    for _k in 0..m.min(n) {
        // starting column: fewest remaining entries
        let mut start = None;
        for j in 0..n {
            if col_done[j] || col_rows[j].is_empty() {
                continue;
            }
            let c = col_rows[j].len();
            if start.is_none_or(|(_, bc)| c < bc) {
                start = Some((j, c));
            }
        }
        let Some((mut pc, _)) = start else { break };
        let mut pr;
        let mut pv;
        let mut guard = 0;
        loop {
            // max in column pc
            let (bi, bv) = col_rows[pc].iter().fold((usize::MAX, -1.0), |b, &i| {
                let v = rows[i].binary_search_by_key(&pc, |e| e.0).map(|p| rows[i][p].1.abs()).unwrap_or(0.0);
                if v > b.1 {
                    (i, v)
                } else {
                    b
                }
            });
            pr = bi;
            pv = bv;
            let (rj, rv) = row_max(&rows, pr);
            guard += 1;
            if rv <= pv || guard > 64 {
                break;
            }
            pc = rj;
        }
        if pv <= thresh {
            // confirm by full scan
            let mut best = (usize::MAX, usize::MAX, -1.0);
            for i in 0..m {
                if row_done[i] {
                    continue;
                }
                for &(j, v) in &rows[i] {
                    if v.abs() > best.2 {
                        best = (i, j, v.abs());
                    }
                }
            }
            if best.2 <= thresh || best.2 <= 0.0 {
                break;
            }
            pr = best.0;
            pc = best.1;
        }
        let prow = core::mem::take(&mut rows[pr]);
        let pval = prow[prow.binary_search_by_key(&pc, |e| e.0).unwrap()].1;
        row_done[pr] = true;
        col_done[pc] = true;
        for &(j, _) in &prow {
            col_rows[j].remove(&pr);
        }
        let targets: Vec<usize> = col_rows[pc].iter().copied().collect();
        for i in targets {
            let r = core::mem::take(&mut rows[i]);
            let aik = r[r.binary_search_by_key(&pc, |e| e.0).unwrap()].1;
            let f = aik / pval;
            lmult[i].push((pr, f));
            for &(j, v) in &r {
                scratch[j] = v;
                in_row[j] = true;
            }
            let mut pattern: Vec<usize> = r.iter().map(|e| e.0).collect();
            for &(j, v) in &prow {
                if !in_row[j] {
                    in_row[j] = true;
                    scratch[j] = 0.0;
                    pattern.push(j);
                    col_rows[j].insert(i);
                }
                scratch[j] -= f * v;
            }
            pattern.sort_unstable();
            let mut nr = Vec::with_capacity(pattern.len());
            for j in pattern {
                in_row[j] = false;
                let v = scratch[j];
                if j == pc || v == 0.0 {
                    col_rows[j].remove(&i);
                } else {
                    nr.push((j, v));
                }
            }
            rows[i] = nr;
        }
        rows[pr] = prow;
        piv_rows.push(pr);
        piv_cols.push(pc);
        rank += 1;
    }

    // complete permutations: pivots first, the rest in original order
    let mut rp = piv_rows.clone();
    rp.extend((0..m).filter(|i| !row_done[*i]));
    let mut cp = piv_cols.clone();
    cp.extend((0..n).filter(|j| !col_done[*j]));
    let mut rpos = vec![0; m];
    for (k, &i) in rp.iter().enumerate() {
        rpos[i] = k;
    }
    let mut cpos = vec![0; n];
    for (k, &j) in cp.iter().enumerate() {
        cpos[j] = k;
    }
    let mut lt = Vec::new();
    for i in 0..m {
        lt.push((rpos[i], rpos[i], 1.0));
        for &(p, f) in &lmult[i] {
            lt.push((rpos[i], rpos[p], f));
        }
    }
    let mut ut = Vec::new();
    for i in 0..m {
        for &(j, v) in &rows[i] {
            if row_done[i] && cpos[j] < rpos[i] {
                continue;
            }
            ut.push((rpos[i], cpos[j], v));
        }
    }
    PermutedLu {
        row_perm: rp,
        col_perm: cp,
        lower: SparseMatrix::from_triplets(m, m, &lt),
        upper: SparseMatrix::from_triplets(m, n, &ut),
        rank,
        pivot_tol,
    }
}

/// Back substitution with a square upper triangular `u1`.
pub fn solve_upper(u1: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>, Error> {
    let n = u1.rows();
    assert_eq!(n, u1.cols());
    assert_eq!(rhs.len(), n);
    let floor = PIVOT_FLOOR * u1.max_abs();
    let mut diag = vec![0.0; n];
    for j in 0..n {
        diag[j] = u1.get(j, j);
        if diag[j].abs() <= floor || diag[j] == 0.0 {
            return Err(Error::SingularTriangular { index: j });
        }
    }
    let mut x = rhs.to_vec();
    for j in (0..n).rev() {
        x[j] /= diag[j];
        let xj = x[j];
        let (ri, v) = u1.col(j);
        for (&i, &a) in ri.iter().zip(v) {
            if i < j {
                x[i] -= a * xj;
            }
        }
    }
    Ok(x)
}

/// Forward substitution with a lower triangular matrix; `unit` skips the
/// diagonal.
pub fn solve_lower(l: &SparseMatrix, rhs: &[f64], unit: bool) -> Result<Vec<f64>, Error> {
    let n = l.rows();
    let mut x = rhs.to_vec();
    for j in 0..n {
        if !unit {
            let d = l.get(j, j);
            if d == 0.0 {
                return Err(Error::SingularTriangular { index: j });
            }
            x[j] /= d;
        }
        let xj = x[j];
        let (ri, v) = l.col(j);
        for (&i, &a) in ri.iter().zip(v) {
            if i > j {
                x[i] -= a * xj;
            }
        }
    }
    Ok(x)
}

/// Solves `Lᵀ x = rhs` for lower triangular `L`.
pub fn solve_lower_transpose(l: &SparseMatrix, rhs: &[f64], unit: bool) -> Result<Vec<f64>, Error> {
    let n = l.rows();
    let mut x = rhs.to_vec();
    for j in (0..n).rev() {
        let (ri, v) = l.col(j);
        let mut s = x[j];
        let mut d = 1.0;
        for (&i, &a) in ri.iter().zip(v) {
            if i > j {
                s -= a * x[i];
            } else if i == j {
                d = a;
            }
        }
        if !unit {
            if d == 0.0 {
                return Err(Error::SingularTriangular { index: j });
            }
            s /= d;
        }
        x[j] = s;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(rows: &[&[f64]]) -> SparseMatrix {
        SparseMatrix::from_dense(&DenseMatrix::from_rows(rows), 0.0)
    }

    #[test]
    fn identity_has_full_rank_and_trivial_permutations() {
        let f = lu_rank_revealing(&SparseMatrix::identity(3), 1e-8).unwrap();
        assert_eq!(f.rank, 3);
        assert_eq!(f.row_perm, vec![0, 1, 2]);
        assert_eq!(f.col_perm, vec![0, 1, 2]);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let f = lu_rank_revealing(&SparseMatrix::zeros(3, 3), 1e-8).unwrap();
        assert_eq!(f.rank, 0);
    }

    #[test]
    fn dependent_rows_rank_one() {
        // rows (1,2) and (2,4): the second is twice the first
        let a = sp(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let f = lu_rank_revealing(&a, 1e-10).unwrap();
        assert_eq!(f.rank, 1);
        assert!(f.reconstruction_error(&a) <= 1e-12);
    }

    #[test]
    fn empty_dimensions_are_degenerate() {
        assert_eq!(lu_rank_revealing(&SparseMatrix::zeros(0, 3), 1e-8).unwrap_err(), Error::DegenerateMatrix);
    }

    #[test]
    fn upper_solve_examples() {
        let x = solve_upper(&SparseMatrix::identity(2), &[1.0, 2.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
        // 2a + b = 4, 4b = 8 → b = 2, a = 1
        let x = solve_upper(&sp(&[&[2.0, 1.0], &[0.0, 4.0]]), &[4.0, 8.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        let e = solve_upper(&sp(&[&[1.0, 0.0], &[0.0, 0.0]]), &[1.0, 1.0]).unwrap_err();
        assert_eq!(e, Error::SingularTriangular { index: 1 });
    }

    #[test]
    fn lower_solves_roundtrip() {
        let l = sp(&[&[2.0, 0.0, 0.0], &[1.0, 3.0, 0.0], &[-1.0, 0.5, 1.0]]);
        let b = [1.0, -2.0, 0.5];
        let x = solve_lower(&l, &b, false).unwrap();
        let r = l.mul_vec(&x);
        let y = solve_lower_transpose(&l, &b, false).unwrap();
        let s = l.tr_mul_vec(&y);
        for i in 0..3 {
            assert!((r[i] - b[i]).abs() < 1e-14);
            assert!((s[i] - b[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn sparse_path_reconstructs() {
        // banded 210 × 230 exercises the sparse route
        let (m, n) = (210, 230);
        let mut t = Vec::new();
        for i in 0..m {
            for d in 0..3 {
                let j = i + d;
                if j < n {
                    t.push((i, j, 1.0 + ((i * 7 + d * 3) % 11) as f64 / 5.0));
                }
            }
        }
        let a = SparseMatrix::from_triplets(m, n, &t);
        let f = lu_rank_revealing(&a, 1e-10).unwrap();
        assert_eq!(f.rank, m);
        assert!(f.reconstruction_error(&a) <= 1e-9 * a.max_abs());
    }

    #[test]
    fn sparse_path_detects_rank_deficiency() {
        let n = 205;
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.push((i, i, 2.0));
            t.push((i, i + 1, -1.0));
        }
        // last row duplicates the first
        t.push((n - 1, 0, 2.0));
        t.push((n - 1, 1, -1.0));
        let a = SparseMatrix::from_triplets(n, n, &t);
        let f = lu_rank_revealing(&a, 1e-10).unwrap();
        assert_eq!(f.rank, n - 1);
        assert!(f.reconstruction_error(&a) <= 1e-9 * a.max_abs());
    }
}
