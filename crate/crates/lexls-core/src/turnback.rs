//! Sparse nullspace bases.
//!
//! [`turnback_euler`] builds a banded basis for the Jacobian of
//! Euler-integrated dynamics without a global factorization: pivot columns
//! and column windows follow from the stage dimensions alone.
//! [`turnback_general`] handles arbitrary sparse matrices starting from a
//! rank-revealing LU.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::numerics::lu::{lu_rank_revealing, solve_lower, solve_upper, PermutedLu};
use crate::numerics::SparseMatrix;
use crate::Error;

/// Relative pivot tolerance of the subset factorizations.
pub const SUBSET_PIVOT_TOL: f64 = 1e-10;
/// Linear-dependence threshold, relative to the column scale.
pub const DEPENDENCE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    Explicit,
    Implicit,
}

/// Stage dimensions. Per stage `t` the columns are
/// `[τ̃_t (n_tau) | γ_t (n_gamma) | q̃_{t+1} (n_q) | q̇_{t+1} (n_qdot)]` and
/// the rows are `[f₁ (n_q); f₂ (n_qdot)]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DynamicsDims {
    pub horizon: usize,
    pub n_q: usize,
    pub n_qdot: usize,
    pub n_tau: usize,
    pub n_gamma: usize,
    pub n_ua: usize,
    pub integrator: Integrator,
}

impl DynamicsDims {
    pub fn n_s(&self) -> usize {
        self.n_q + self.n_qdot
    }

    /// Columns per stage.
    pub fn stage_width(&self) -> usize {
        self.n_tau + self.n_gamma + self.n_s()
    }

    pub fn n(&self) -> usize {
        self.horizon * self.stage_width()
    }

    pub fn rows(&self) -> usize {
        self.horizon * self.n_s()
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.n_q != self.n_qdot {
            return Err(Error::InvalidSettings("n_q must equal n_qdot"));
        }
        if self.n_tau + self.n_ua != self.n_qdot {
            return Err(Error::InvalidSettings("n_tau + n_ua must equal n_qdot"));
        }
        Ok(())
    }

    fn banded(&self) -> Result<(), Error> {
        self.validate()?;
        if self.n_ua >= self.n_q {
            return Err(Error::FullUnderactuation);
        }
        Ok(())
    }
}

/// Subset augmentation factor `⌈2 n_ua / (n_q − n_ua)⌉`.
pub fn mu_factor(d: &DynamicsDims) -> Result<usize, Error> {
    d.banded()?;
    let num = 2 * d.n_ua;
    let den = d.n_q - d.n_ua;
    Ok(num.div_ceil(den))
}

/// Width of the column window holding one stage's null vectors.
pub fn bandwidth(d: &DynamicsDims) -> Result<usize, Error> {
    let mu = mu_factor(d)?;
    Ok((2 + mu) * d.n_s() + (3 + mu) * (d.n_tau + d.n_gamma))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TurnbackParams {
    pub r_a: usize,
    pub r_z: usize,
    /// First column of each stage window.
    pub b: Vec<usize>,
    /// One past the last column of each stage window.
    pub b_plus: Vec<usize>,
    /// Pivot columns, `n_tau + n_gamma` per stage.
    pub pi: Vec<usize>,
}

impl TurnbackParams {
    pub fn pivots_per_stage(&self) -> usize {
        if self.b.is_empty() {
            0
        } else {
            self.r_z / self.b.len()
        }
    }

    pub fn stage_pivots(&self, t: usize) -> &[usize] {
        let k = self.pivots_per_stage();
        &self.pi[t * k..(t + 1) * k]
    }
}

/// Window bounds and pivot columns from the stage dimensions alone.
pub fn turnback_param(d: &DynamicsDims) -> Result<TurnbackParams, Error> {
    let beta = bandwidth(d)?;
    let n = d.n();
    let r_a = d.horizon * d.n_s();
    let r_z = d.horizon * (d.n_tau + d.n_gamma);
    let mut b = Vec::with_capacity(d.horizon);
    let mut b_plus = Vec::with_capacity(d.horizon);
    let mut pi = Vec::with_capacity(r_z);
    let mut n_b = 0;
    for _ in 0..d.horizon {
        b.push(n_b);
        b_plus.push((n_b + beta).min(n));
        for j in 0..d.n_gamma {
            pi.push(n_b + d.n_tau + j);
        }
        for j in 0..(d.n_qdot - d.n_ua) {
            pi.push(match d.integrator {
                Integrator::Explicit => n_b + d.n_tau + d.n_gamma + d.n_q + d.n_ua + j,
                Integrator::Implicit => n_b + d.n_tau + d.n_gamma + d.n_ua + j,
            });
        }
        n_b += d.stage_width();
    }
    Ok(TurnbackParams { r_a, r_z, b, b_plus, pi })
}

#[derive(Clone, Debug)]
pub struct NullspaceBasis {
    /// `n × r_Z`
    pub z: SparseMatrix,
    /// `pivot_rows[i]` carries the unit entry of column `i`.
    pub pivot_rows: Vec<usize>,
    /// `max_i ‖A z_i‖∞`
    pub verified_residual: f64,
    /// Number of window widenings performed.
    pub augmentations: usize,
}

impl NullspaceBasis {
    pub fn identity(n: usize) -> Self {
        NullspaceBasis {
            z: SparseMatrix::identity(n),
            pivot_rows: (0..n).collect(),
            verified_residual: 0.0,
            augmentations: 0,
        }
    }

    pub fn empty(n: usize) -> Self {
        NullspaceBasis {
            z: SparseMatrix::zeros(n, 0),
            pivot_rows: Vec::new(),
            verified_residual: 0.0,
            augmentations: 0,
        }
    }

    pub fn rank(&self) -> usize {
        self.z.cols()
    }

    /// Checks the full-rank certificate: ordered by pivot row, the pivot-row
    /// submatrix is unit lower triangular (the identity when no window
    /// reaches another stage's pivot).
    pub fn rank_certificate(&self) -> bool {
        let k = self.z.cols();
        if self.pivot_rows.len() != k {
            return false;
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&i| self.pivot_rows[i]);
        let mut rank_of = vec![usize::MAX; self.z.rows()];
        for (r, &i) in order.iter().enumerate() {
            if rank_of[self.pivot_rows[i]] != usize::MAX {
                return false;
            }
            rank_of[self.pivot_rows[i]] = r;
        }
        for (r, &i) in order.iter().enumerate() {
            let (ri, v) = self.z.col(i);
            for (&row, &x) in ri.iter().zip(v) {
                let s = rank_of[row];
                if s == usize::MAX {
                    continue;
                }
                if s == r && x != 1.0 {
                    return false;
                }
                if s < r && x != 0.0 {
                    return false;
                }
            }
            if self.z.get(self.pivot_rows[i], i) != 1.0 {
                return false;
            }
        }
        true
    }

    /// Largest `last − first + 1` over column supports.
    pub fn max_support_width(&self) -> usize {
        (0..self.z.cols()).filter_map(|j| self.z.col_support(j)).map(|(a, b)| b - a + 1).max().unwrap_or(0)
    }
}

/// Residual bound every basis column must meet.
pub fn residual_tolerance(a: &SparseMatrix) -> f64 {
    DEPENDENCE_TOL * (1.0 + a.norm_inf())
}

/// Largest `‖A z_i‖∞` over the columns of `z`.
pub fn basis_residual(a: &SparseMatrix, z: &SparseMatrix) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..z.cols() {
        let (ri, v) = z.col(j);
        let mut dense = vec![0.0; z.rows()];
        for (&i, &x) in ri.iter().zip(v) {
            dense[i] = x;
        }
        let r = a.mul_vec(&dense);
        worst = worst.max(r.iter().fold(0.0, |m, x| m.max(x.abs())));
    }
    worst
}

/// LU of a column subset with the row set it touches.
struct SubsetFactor {
    rows: Vec<usize>,
    row_pos: Vec<usize>,
    cols: Vec<usize>,
    lu: Option<PermutedLu>,
    u1: Option<SparseMatrix>,
}

impl SubsetFactor {
    fn new(a: &SparseMatrix, cols: Vec<usize>, extra: &[usize]) -> Result<Self, Error> {
        let mut rows = BTreeSet::new();
        for &c in cols.iter().chain(extra) {
            rows.extend(a.col(c).0.iter().copied());
        }
        let rows: Vec<usize> = rows.into_iter().collect();
        let mut row_pos = vec![usize::MAX; a.rows()];
        for (k, &r) in rows.iter().enumerate() {
            row_pos[r] = k;
        }
        let columns: Vec<Vec<(usize, f64)>> = cols
            .iter()
            .map(|&c| {
                let (ri, v) = a.col(c);
                ri.iter().map(|&i| row_pos[i]).zip(v.iter().copied()).collect()
            })
            .collect();
        let g = SparseMatrix::from_columns(rows.len(), &columns);
        let (lu, u1) = if g.rows() == 0 || g.cols() == 0 || g.max_abs() == 0.0 {
            (None, None)
        } else {
            let lu = lu_rank_revealing(&g, SUBSET_PIVOT_TOL)?;
            let r = lu.rank;
            let idx: Vec<usize> = (0..r).collect();
            let u1 = lu.upper.select_rows(&idx).select_cols(&idx);
            (Some(lu), Some(u1))
        };
        Ok(SubsetFactor { rows, row_pos, cols, lu, u1 })
    }

    /// Null vector with a unit entry at column `p`, as sorted
    /// `(index, value)` pairs, and its residual `‖A z‖∞`.
    fn null_vector(&self, a: &SparseMatrix, p: usize) -> Result<(Vec<(usize, f64)>, f64), Error> {
        let m = self.rows.len();
        let mut rhs = vec![0.0; m];
        let (ri, v) = a.col(p);
        for (&i, &x) in ri.iter().zip(v) {
            rhs[self.row_pos[i]] = -x;
        }
        let mut entries: Vec<(usize, f64)> = vec![(p, 1.0)];
        if let (Some(lu), Some(u1)) = (&self.lu, &self.u1) {
            let pr: Vec<f64> = lu.row_perm.iter().map(|&i| rhs[i]).collect();
            let c = solve_lower(&lu.lower, &pr, true)?;
            let r = lu.rank;
            let yq = if r > 0 { solve_upper(u1, &c[..r])? } else { Vec::new() };
            let drop = 1e-15 * yq.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            for k in 0..r {
                if yq[k].abs() > drop {
                    entries.push((self.cols[lu.col_perm[k]], yq[k]));
                }
            }
        }
        entries.sort_by_key(|e| e.0);
        // residual on the touched rows; other rows see no nonzero of z
        let mut res = vec![0.0; m];
        for &(c, x) in &entries {
            let (ri, v) = a.col(c);
            for (&i, &y) in ri.iter().zip(v) {
                res[self.row_pos[i]] += x * y;
            }
        }
        let resid = res.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok((entries, resid))
    }
}

/// Column window of one stage: `[left, right)` minus excluded pivots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageSubset {
    pub stage: usize,
    pub left: usize,
    pub right: usize,
    pub augmentations: usize,
}

impl StageSubset {
    pub fn initial(params: &TurnbackParams, t: usize) -> Self {
        StageSubset { stage: t, left: params.b[t], right: params.b_plus[t], augmentations: 0 }
    }

    /// Columns of the window that may carry null-vector entries: the
    /// stage's own pivots and pivots of earlier stages are left out.
    pub fn columns(&self, params: &TurnbackParams) -> Vec<usize> {
        let k = params.pivots_per_stage();
        let excluded_upto = (self.stage + 1) * k;
        let excluded: BTreeSet<usize> = params.pi[..excluded_upto].iter().copied().collect();
        (self.left..self.right).filter(|c| !excluded.contains(c)).collect()
    }
}

/// Widens a stage window by one stage on each side. Returns `None` once the
/// window already spans every column.
pub fn augment_subset(subset: &StageSubset, dims: &DynamicsDims) -> Option<StageSubset> {
    let n = dims.n();
    if subset.left == 0 && subset.right >= n {
        return None;
    }
    let w = dims.stage_width();
    Some(StageSubset {
        stage: subset.stage,
        left: subset.left.saturating_sub(w),
        right: (subset.right + w).min(n),
        augmentations: subset.augmentations + 1,
    })
}

type StageColumns = (Vec<Vec<(usize, f64)>>, f64, usize);

fn euler_stage(
    a: &SparseMatrix,
    dims: &DynamicsDims,
    params: &TurnbackParams,
    t: usize,
    tol: f64,
) -> Result<StageColumns, Error> {
    let pivots = params.stage_pivots(t);
    let mut subset = StageSubset::initial(params, t);
    loop {
        let factor = SubsetFactor::new(a, subset.columns(params), pivots)?;
        let mut cols = Vec::with_capacity(pivots.len());
        let mut worst = 0.0f64;
        for &p in pivots {
            let (z, r) = factor.null_vector(a, p)?;
            worst = worst.max(r);
            if r > tol {
                break;
            }
            cols.push(z);
        }
        if cols.len() == pivots.len() {
            return Ok((cols, worst, subset.augmentations));
        }
        subset = match augment_subset(&subset, dims) {
            Some(s) => s,
            None => return Err(Error::BasisVerificationFailed { residual: worst }),
        };
    }
}

fn check_euler_shape(a: &SparseMatrix, dims: &DynamicsDims) -> Result<(), Error> {
    if a.cols() != dims.n() {
        return Err(Error::DimensionMismatch { expected: dims.n(), found: a.cols() });
    }
    if a.rows() != dims.rows() {
        return Err(Error::DimensionMismatch { expected: dims.rows(), found: a.rows() });
    }
    Ok(())
}

fn assemble(n: usize, stages: Vec<StageColumns>, pivots: &[usize]) -> NullspaceBasis {
    let mut columns = Vec::with_capacity(pivots.len());
    let mut resid = 0.0f64;
    let mut aug = 0;
    for (cols, r, k) in stages {
        columns.extend(cols);
        resid = resid.max(r);
        aug += k;
    }
    NullspaceBasis {
        z: SparseMatrix::from_columns(n, &columns),
        pivot_rows: pivots.to_vec(),
        verified_residual: resid,
        augmentations: aug,
    }
}

/// Banded nullspace basis of an Euler-dynamics Jacobian, one stage window
/// at a time.
pub fn turnback_euler(a: &SparseMatrix, dims: &DynamicsDims) -> Result<NullspaceBasis, Error> {
    turnback_euler_threaded(a, dims, 1)
}

/// As [`turnback_euler`], splitting the stages over `threads` workers. The
/// result does not depend on the thread count.
pub fn turnback_euler_threaded(a: &SparseMatrix, dims: &DynamicsDims, threads: usize) -> Result<NullspaceBasis, Error> {
    let params = turnback_param(dims)?;
    check_euler_shape(a, dims)?;
    let tol = residual_tolerance(a);
    let stages = run_stages(dims.horizon, threads, |t| euler_stage(a, dims, &params, t, tol))?;
    Ok(assemble(a.cols(), stages, &params.pi))
}

#[cfg(feature = "std")]
fn run_stages<F>(count: usize, threads: usize, f: F) -> Result<Vec<StageColumns>, Error>
where
    F: Fn(usize) -> Result<StageColumns, Error> + Sync,
{
    let threads = threads.max(1).min(count.max(1));
    if threads == 1 {
        return (0..count).map(&f).collect();
    }
    let chunk = count.div_ceil(threads);
    let parts: Vec<Result<Vec<StageColumns>, Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let f = &f;
                s.spawn(move || (w * chunk..((w + 1) * chunk).min(count)).map(f).collect::<Result<Vec<_>, _>>())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("turnback worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(count);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

#[cfg(not(feature = "std"))]
fn run_stages<F>(count: usize, _threads: usize, f: F) -> Result<Vec<StageColumns>, Error>
where
    F: Fn(usize) -> Result<StageColumns, Error>,
{
    (0..count).map(f).collect()
}

/// Nullspace basis of an arbitrary sparse matrix.
///
/// A rank-revealing LU fixes the pivot columns (the non-basic columns).
/// For each pivot, a column window grows around the first nonzero of the
/// corresponding LU null vector until the pivot column is dependent on the
/// basic columns inside it.
pub fn turnback_general(a: &SparseMatrix) -> Result<NullspaceBasis, Error> {
    let n = a.cols();
    if n == 0 {
        return Ok(NullspaceBasis::empty(0));
    }
    if a.rows() == 0 || a.max_abs() == 0.0 {
        return Ok(NullspaceBasis::identity(n));
    }
    let lu = lu_rank_revealing(a, SUBSET_PIVOT_TOL)?;
    let r = lu.rank;
    if r == n {
        return Ok(NullspaceBasis::empty(n));
    }
    let tol = residual_tolerance(a);
    let mut pivots: Vec<usize> = lu.col_perm[r..].to_vec();
    pivots.sort_unstable();
    let mut is_pivot = vec![false; n];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let idx: Vec<usize> = (0..r).collect();
    let u1 = lu.upper.select_rows(&idx).select_cols(&idx);
    let mut columns = Vec::with_capacity(pivots.len());
    let mut worst = 0.0f64;
    let mut aug = 0;
    for &p in &pivots {
        // column of Z_LU for this pivot gives the starting index
        let qpos = lu.col_perm.iter().position(|&c| c == p).expect("pivot in permutation");
        let (ri, v) = lu.upper.col(qpos);
        let mut u2 = vec![0.0; r];
        for (&i, &x) in ri.iter().zip(v) {
            if i < r {
                u2[i] = x;
            }
        }
        let y = if r > 0 { solve_upper(&u1, &u2)? } else { Vec::new() };
        let mut lu_col: Vec<(usize, f64)> = vec![(p, 1.0)];
        for k in 0..r {
            if y[k] != 0.0 {
                lu_col.push((lu.col_perm[k], -y[k]));
            }
        }
        lu_col.sort_by_key(|e| e.0);
        let first = lu_col[0].0;
        let mut left = first.min(p);
        let mut right = (p + 1).max(left + 1);
        let mut grow = 1usize;
        let found = loop {
            let cols: Vec<usize> = (left..right).filter(|&c| !is_pivot[c]).collect();
            let factor = SubsetFactor::new(a, cols, &[p])?;
            let (z, res) = factor.null_vector(a, p)?;
            if res <= tol {
                worst = worst.max(res);
                break Some(z);
            }
            if left == 0 && right == n {
                break None;
            }
            aug += 1;
            right = (right + grow).min(n);
            left = left.saturating_sub(grow);
            grow *= 2;
        };
        match found {
            Some(z) => columns.push(z),
            None => {
                let res = column_residual(a, &lu_col);
                if res > tol {
                    return Err(Error::BasisVerificationFailed { residual: res });
                }
                worst = worst.max(res);
                columns.push(lu_col);
            }
        }
    }
    Ok(NullspaceBasis {
        z: SparseMatrix::from_columns(n, &columns),
        pivot_rows: pivots,
        verified_residual: worst,
        augmentations: aug,
    })
}

fn column_residual(a: &SparseMatrix, z: &[(usize, f64)]) -> f64 {
    let mut r = vec![0.0; a.rows()];
    for &(c, x) in z {
        let (ri, v) = a.col(c);
        for (&i, &y) in ri.iter().zip(v) {
            r[i] += x * y;
        }
    }
    r.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Basis `N₂` of `(R·Z)·N₂ = 0`, so that `Z·N₂` also annihilates `R`.
pub fn nested_basis(r_soi: &SparseMatrix, z_dyn: &NullspaceBasis) -> Result<NullspaceBasis, Error> {
    let k = z_dyn.z.cols();
    if r_soi.rows() == 0 {
        return Ok(NullspaceBasis::identity(k));
    }
    let projected = r_soi.mul_sparse(&z_dyn.z).pruned(0.0);
    let mut n2 = turnback_general(&projected)?;
    let composite = z_dyn.z.mul_sparse(&n2.z);
    n2.verified_residual = basis_residual(r_soi, &composite);
    Ok(n2)
}

/// Layout change from appending virtual controls on the unactuated
/// degrees of freedom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VirtualControls {
    /// Fully actuated dimensions (`n_tau = n_qdot`, `n_ua = 0`).
    pub dims: DynamicsDims,
    /// Virtual control columns in the new layout.
    pub columns: Vec<usize>,
    /// New index of every original column.
    pub old_to_new: Vec<usize>,
}

/// Inserts `n_ua` virtual control columns at the front of every stage.
/// With `n_ua = 0` the layout is unchanged.
pub fn add_virtual_controls(dims: &DynamicsDims) -> VirtualControls {
    let k = dims.n_ua;
    let w = dims.stage_width();
    let mut nd = *dims;
    nd.n_tau += k;
    nd.n_ua = 0;
    let mut columns = Vec::with_capacity(dims.horizon * k);
    let mut old_to_new = Vec::with_capacity(dims.n());
    for t in 0..dims.horizon {
        let base = t * (w + k);
        columns.extend(base..base + k);
        old_to_new.extend((0..w).map(|j| base + k + j));
    }
    VirtualControls { dims: nd, columns, old_to_new }
}

/// Recognizes a projected Euler Jacobian: if the removed columns are
/// exactly the first `k ≤ n_tau` control columns of every stage, the kept
/// columns again follow the Euler layout with `k` more unactuated
/// degrees of freedom.
pub fn reduced_dims(dims: &DynamicsDims, removed: &[usize]) -> Option<DynamicsDims> {
    if removed.is_empty() {
        return Some(*dims);
    }
    if removed.len() % dims.horizon != 0 {
        return None;
    }
    let k = removed.len() / dims.horizon;
    if k > dims.n_tau {
        return None;
    }
    let w = dims.stage_width();
    let expected = (0..dims.horizon).flat_map(|t| (t * w)..(t * w + k));
    if !expected.eq(removed.iter().copied()) {
        return None;
    }
    let mut nd = *dims;
    nd.n_tau -= k;
    nd.n_ua += k;
    Some(nd)
}
