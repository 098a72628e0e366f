//! Priority levels of nonlinear constraint blocks, their linearization and
//! the feasibility/optimality measures used by the step filter.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::numerics::dense::{norm1, symmetric_eigen, DenseMatrix};
use crate::numerics::SparseMatrix;
use crate::turnback::DynamicsDims;
use crate::{math, Error};

/// Floor applied to eigenvalues of the hierarchical Hessian.
pub const EIG_FLOOR: f64 = 1e-8;
/// Weight of the identity used when second derivatives are missing.
pub const FALLBACK_WEIGHT: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// `f(x) = v`
    Equality,
    /// `f(x) ≤ v`
    Inequality,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Structure {
    Dense,
    StageBanded,
    /// Jacobian follows the Euler-integrated dynamics layout for `dims`.
    EulerDynamics(DynamicsDims),
}

pub trait ConstraintBlock: Send + Sync {
    fn dim(&self) -> usize;
    fn kind(&self) -> Kind;
    fn eval(&self, x: &[f64]) -> Vec<f64>;
    /// `dim × n` Jacobian.
    fn jacobian(&self, x: &[f64]) -> SparseMatrix;
    /// `Σ λᵢ ∇²fᵢ(x)` as an `n × n` matrix, or `None` when unavailable.
    fn hessian(&self, _x: &[f64], _lambda: &[f64]) -> Option<SparseMatrix> {
        None
    }
    /// Variables the block depends on.
    fn variables(&self) -> Vec<usize>;
    fn structure(&self) -> Structure {
        Structure::Dense
    }
}

pub struct Level {
    pub name: &'static str,
    pub blocks: Vec<Box<dyn ConstraintBlock>>,
}

impl Level {
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }

    pub fn kinds(&self) -> Vec<Kind> {
        self.blocks.iter().flat_map(|b| core::iter::repeat_n(b.kind(), b.dim())).collect()
    }

    pub fn variables(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.blocks.iter().flat_map(|b| b.variables()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

pub struct Hierarchy {
    n: usize,
    levels: Vec<Level>,
}

impl Hierarchy {
    pub fn new(n: usize) -> Self {
        Hierarchy { n, levels: Vec::new() }
    }

    pub fn push_level(&mut self, name: &'static str, blocks: Vec<Box<dyn ConstraintBlock>>) {
        self.levels.push(Level { name, blocks });
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of priority levels.
    pub fn p(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &Level {
        &self.levels[l]
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.levels.is_empty() {
            return Err(Error::InvalidSettings("hierarchy needs at least one level"));
        }
        for lvl in &self.levels {
            for b in &lvl.blocks {
                if let Some(&v) = b.variables().iter().max() {
                    if v >= self.n {
                        return Err(Error::DimensionMismatch { expected: self.n, found: v + 1 });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn evaluate_level(&self, l: usize, x: &[f64]) -> Result<Vec<f64>, Error> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.len() });
        }
        let mut f = Vec::with_capacity(self.levels[l].dim());
        for b in &self.levels[l].blocks {
            f.extend(b.eval(x));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEvaluation { level: l });
        }
        Ok(f)
    }

    /// Residuals of every level at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, Error> {
        (0..self.p()).map(|l| self.evaluate_level(l, x)).collect()
    }

    /// `[f_E ; max(0, f_I)]` for level `l` (0-based).
    pub fn f_plus(&self, x: &[f64], l: usize) -> Result<Vec<f64>, Error> {
        let f = self.evaluate_level(l, x)?;
        Ok(clamp_plus(&f, &self.levels[l].kinds()))
    }

    /// ℓ1 deviation of levels `0..l` from their frozen slacks `v_star`.
    pub fn h_measure(&self, x: &[f64], l: usize, v_star: &[Vec<f64>]) -> Result<f64, Error> {
        let mut h = 0.0;
        for k in 0..l {
            let fp = self.f_plus(x, k)?;
            h += norm1(&crate::numerics::dense::sub(&fp, &v_star[k]));
        }
        Ok(h)
    }

    pub fn jacobian_level(&self, l: usize, x: &[f64]) -> SparseMatrix {
        let mut trip = Vec::new();
        let mut off = 0;
        for b in &self.levels[l].blocks {
            let j = b.jacobian(x);
            debug_assert_eq!((j.rows(), j.cols()), (b.dim(), self.n));
            trip.extend(j.triplets().map(|(i, c, v)| (i + off, c, v)));
            off += b.dim();
        }
        SparseMatrix::from_triplets(off, self.n, &trip)
    }

    /// Linearizes levels `0..levels` at `x`. Level `l` yields `A_l = J_l`,
    /// `b_l = −f_l(x)`, plus the rows `R_l` with zero right-hand side when
    /// `soi` holds a factor for it.
    pub fn linearize(&self, x: &[f64], soi: &SoiState, trust_radius: f64, levels: usize) -> Result<HlspData, Error> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEvaluation { level: 0 });
        }
        let mut out = Vec::with_capacity(levels);
        for l in 0..levels {
            let f = self.evaluate_level(l, x)?;
            let mut a = self.jacobian_level(l, x);
            if !a.is_finite() {
                return Err(Error::NonFiniteEvaluation { level: l });
            }
            let mut b: Vec<f64> = f.iter().map(|v| -v).collect();
            let mut kinds = self.levels[l].kinds();
            let constraint_rows = b.len();
            let mut euler = None;
            let mut off = 0;
            for blk in &self.levels[l].blocks {
                if let Structure::EulerDynamics(dims) = blk.structure() {
                    if euler.is_none() && blk.kind() == Kind::Equality {
                        euler = Some(EulerRows { start: off, dims });
                    }
                }
                off += blk.dim();
            }
            if let Some(r) = soi.levels.get(l).and_then(|s| if s.active { s.factor.as_ref() } else { None }) {
                a = a.vstack(r);
                b.extend(core::iter::repeat_n(0.0, r.rows()));
                kinds.extend(core::iter::repeat_n(Kind::Equality, r.rows()));
            }
            out.push(HlspLevel { a, b, kinds, constraint_rows, euler });
        }
        Ok(HlspData { n: self.n, trust_radius, levels: out })
    }

    /// Factor `R` (rows × n) with `RᵀR` equal to the eigenvalue-clamped
    /// multiplier-weighted Hessian of levels `0..=l`, restricted to the
    /// variables of level `l`. `multipliers[k]` weights the rows of level
    /// `k`.
    pub fn hierarchical_hessian_factor(
        &self,
        x: &[f64],
        l: usize,
        multipliers: &[Vec<f64>],
    ) -> (SparseMatrix, HessianStatus) {
        let support = self.levels[l].variables();
        let s = support.len();
        let mut pos = vec![usize::MAX; self.n];
        for (k, &j) in support.iter().enumerate() {
            pos[j] = k;
        }
        let mut h = DenseMatrix::zeros(s, s);
        let mut status = HessianStatus::Exact;
        'levels: for k in 0..=l {
            let lam = &multipliers[k];
            let mut off = 0;
            for b in &self.levels[k].blocks {
                let m = b.dim();
                let lb = &lam[off..off + m];
                off += m;
                if lb.iter().all(|v| *v == 0.0) {
                    continue;
                }
                match b.hessian(x, lb) {
                    Some(hb) => {
                        for (i, j, v) in hb.triplets() {
                            if pos[i] != usize::MAX && pos[j] != usize::MAX {
                                h[(pos[i], pos[j])] += v;
                            }
                        }
                    }
                    None => {
                        status = HessianStatus::FallbackToIdentity;
                        break 'levels;
                    }
                }
            }
        }
        let mut trip = Vec::new();
        match status {
            HessianStatus::FallbackToIdentity => {
                let w = math::sqrt(FALLBACK_WEIGHT);
                for (k, &j) in support.iter().enumerate() {
                    trip.push((k, j, w));
                }
            }
            HessianStatus::Exact => {
                h.symmetrize();
                let (vals, vecs) = symmetric_eigen(&h);
                // R = diag(√λ) Vᵀ
                for k in 0..s {
                    let lam = vals[k].max(EIG_FLOOR);
                    let sq = math::sqrt(lam);
                    for (i, &j) in support.iter().enumerate() {
                        let v = sq * vecs[(i, k)];
                        if v != 0.0 {
                            trip.push((k, j, v));
                        }
                    }
                }
            }
        }
        (SparseMatrix::from_triplets(s, self.n, &trip), status)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HessianStatus {
    Exact,
    FallbackToIdentity,
}

pub fn clamp_plus(f: &[f64], kinds: &[Kind]) -> Vec<f64> {
    f.iter()
        .zip(kinds)
        .map(|(&v, k)| match k {
            Kind::Equality => v,
            Kind::Inequality => v.max(0.0),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EulerRows {
    pub start: usize,
    pub dims: DynamicsDims,
}

/// One linearized level: rows `A Δx − b` with `b = −f(x)`.
#[derive(Clone, Debug)]
pub struct HlspLevel {
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub kinds: Vec<Kind>,
    /// Rows `0..constraint_rows` come from constraints; the rest are SOI rows.
    pub constraint_rows: usize,
    pub euler: Option<EulerRows>,
}

impl HlspLevel {
    pub fn rows(&self) -> usize {
        self.b.len()
    }
}

#[derive(Clone, Debug)]
pub struct HlspData {
    pub n: usize,
    /// Half-width of the ∞-norm box on Δx (the top-priority level).
    pub trust_radius: f64,
    pub levels: Vec<HlspLevel>,
}

impl HlspData {
    pub fn p(&self) -> usize {
        self.levels.len()
    }
}

#[derive(Clone, Debug, Default)]
pub struct SoiLevel {
    pub active: bool,
    pub factor: Option<SparseMatrix>,
    pub status: Option<HessianStatus>,
}

#[derive(Clone, Debug, Default)]
pub struct SoiState {
    pub levels: Vec<SoiLevel>,
}

impl SoiState {
    pub fn off(p: usize) -> Self {
        SoiState { levels: vec![SoiLevel::default(); p] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    /// From the level's own inequalities (or its equalities).
    Own,
    /// Promoted from the inactive set of higher levels (virtual level).
    Promoted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RowRef {
    pub level: usize,
    pub row: usize,
}

/// Rows fixed at the end of each level, in activation order.
#[derive(Clone, Debug, Default)]
pub struct ActiveSetState {
    /// Per level: rows activated there, with their origin.
    pub active: Vec<Vec<(RowRef, Origin)>>,
    /// Inactive inequality rows after each level.
    pub inactive: Vec<Vec<RowRef>>,
}

/// Largest violation of `|J − J_fd| ≤ max(1e-5, 1e-4‖J‖∞)` for central
/// differences with step `step`, returned as the ratio error/tolerance.
pub fn jacobian_fd_ratio(block: &dyn ConstraintBlock, x: &[f64], step: f64) -> f64 {
    let j = block.jacobian(x).to_dense();
    let tol = (1e-4 * j.max_abs()).max(1e-5);
    let mut worst = 0.0f64;
    let mut xp = x.to_vec();
    for c in 0..x.len() {
        let x0 = xp[c];
        xp[c] = x0 + step;
        let fp = block.eval(&xp);
        xp[c] = x0 - step;
        let fm = block.eval(&xp);
        xp[c] = x0;
        for i in 0..block.dim() {
            let fd = (fp[i] - fm[i]) / (2.0 * step);
            worst = worst.max((fd - j[(i, c)]).abs() / tol);
        }
    }
    worst
}

/// Same check for `hessian` against differences of `Jᵀλ`.
pub fn hessian_fd_ratio(block: &dyn ConstraintBlock, x: &[f64], lambda: &[f64], step: f64) -> Option<f64> {
    let h = block.hessian(x, lambda)?.to_dense();
    let tol = (1e-4 * h.max_abs()).max(1e-5);
    let mut worst = 0.0f64;
    let mut xp = x.to_vec();
    for c in 0..x.len() {
        let x0 = xp[c];
        xp[c] = x0 + step;
        let gp = block.jacobian(&xp).tr_mul_vec(lambda);
        xp[c] = x0 - step;
        let gm = block.jacobian(&xp).tr_mul_vec(lambda);
        xp[c] = x0;
        for i in 0..x.len() {
            let fd = (gp[i] - gm[i]) / (2.0 * step);
            worst = worst.max((fd - h[(i, c)]).abs() / tol);
        }
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::boxed::Box;

    /// `Σ xᵢ² − c` over selected variables.
    struct Sphere {
        vars: Vec<usize>,
        c: f64,
        n: usize,
        kind: Kind,
    }

    impl ConstraintBlock for Sphere {
        fn dim(&self) -> usize {
            1
        }
        fn kind(&self) -> Kind {
            self.kind
        }
        fn eval(&self, x: &[f64]) -> Vec<f64> {
            vec![self.vars.iter().map(|&i| x[i] * x[i]).sum::<f64>() - self.c]
        }
        fn jacobian(&self, x: &[f64]) -> SparseMatrix {
            let t: Vec<_> = self.vars.iter().map(|&i| (0, i, 2.0 * x[i])).collect();
            SparseMatrix::from_triplets(1, self.n, &t)
        }
        fn hessian(&self, _x: &[f64], l: &[f64]) -> Option<SparseMatrix> {
            let t: Vec<_> = self.vars.iter().map(|&i| (i, i, 2.0 * l[0])).collect();
            Some(SparseMatrix::from_triplets(self.n, self.n, &t))
        }
        fn variables(&self) -> Vec<usize> {
            self.vars.clone()
        }
    }

    struct Affine {
        a: DenseMatrix,
        c: Vec<f64>,
    }

    impl ConstraintBlock for Affine {
        fn dim(&self) -> usize {
            self.a.rows()
        }
        fn kind(&self) -> Kind {
            Kind::Equality
        }
        fn eval(&self, x: &[f64]) -> Vec<f64> {
            crate::numerics::dense::sub(&self.a.mul_vec(x), &self.c)
        }
        fn jacobian(&self, _x: &[f64]) -> SparseMatrix {
            SparseMatrix::from_dense(&self.a, 0.0)
        }
        fn hessian(&self, _x: &[f64], _l: &[f64]) -> Option<SparseMatrix> {
            Some(SparseMatrix::zeros(self.a.cols(), self.a.cols()))
        }
        fn variables(&self) -> Vec<usize> {
            (0..self.a.cols()).collect()
        }
    }

    fn disk(kind: Kind, c: f64) -> Box<dyn ConstraintBlock> {
        Box::new(Sphere { vars: vec![0, 1], c, n: 2, kind })
    }

    #[test]
    fn disk_at_origin() {
        let mut h = Hierarchy::new(2);
        h.push_level("disk", vec![disk(Kind::Inequality, 1.9)]);
        assert_eq!(h.evaluate(&[0.0, 0.0]).unwrap(), vec![vec![-1.9]]);
        // feasible inequality contributes 0 to f⁺
        assert_eq!(h.f_plus(&[0.0, 0.0], 0).unwrap(), vec![0.0]);
    }

    #[test]
    fn f_plus_passes_equalities() {
        let mut h = Hierarchy::new(2);
        h.push_level("disk", vec![disk(Kind::Equality, 3.0)]);
        assert_eq!(h.f_plus(&[0.0, 0.0], 0).unwrap(), vec![-3.0]);
    }

    #[test]
    fn h_measure_examples() {
        let mut h = Hierarchy::new(2);
        h.push_level("a", vec![disk(Kind::Equality, 0.0)]);
        h.push_level("b", vec![disk(Kind::Equality, 0.0)]);
        assert_eq!(h.h_measure(&[1.0, 1.0], 0, &[]).unwrap(), 0.0);
        // f = 2 at (1,1) with frozen slack 0.5 → |2 − 0.5|
        let v = vec![vec![0.5]];
        assert!((h.h_measure(&[1.0, 1.0], 1, &v).unwrap() - 1.5).abs() < 1e-15);
        // a root with zero slack
        assert_eq!(h.h_measure(&[0.0, 0.0], 1, &[vec![0.0]]).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_is_reported() {
        let mut h = Hierarchy::new(2);
        h.push_level("a", vec![disk(Kind::Equality, 0.0)]);
        assert_eq!(h.evaluate(&[f64::NAN, 0.0]).unwrap_err(), Error::NonFiniteEvaluation { level: 0 });
    }

    #[test]
    fn linear_block_linearizes_to_its_matrix() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[0.0, -1.0]]);
        let mut h = Hierarchy::new(2);
        h.push_level("lin", vec![Box::new(Affine { a: a.clone(), c: vec![1.0, 1.0] })]);
        let x = [0.3, -0.7];
        let d = h.linearize(&x, &SoiState::off(1), 1.0, 1).unwrap();
        assert_eq!(d.levels[0].a.to_dense(), a);
        let f = h.evaluate_level(0, &x).unwrap();
        for i in 0..2 {
            assert_eq!(d.levels[0].b[i], -f[i]);
        }
        assert_eq!(d.levels[0].rows(), 2);
    }

    #[test]
    fn soi_rows_are_appended_with_zero_rhs() {
        let mut h = Hierarchy::new(2);
        h.push_level("disk", vec![disk(Kind::Equality, 1.0)]);
        let (r, st) = h.hierarchical_hessian_factor(&[0.5, 0.5], 0, &[vec![1.0]]);
        assert_eq!(st, HessianStatus::Exact);
        let mut soi = SoiState::off(1);
        soi.levels[0] = SoiLevel { active: true, factor: Some(r), status: Some(st) };
        let d = h.linearize(&[0.5, 0.5], &soi, 1.0, 1).unwrap();
        assert_eq!(d.levels[0].rows(), 3);
        assert_eq!(d.levels[0].constraint_rows, 1);
        assert_eq!(&d.levels[0].b[1..], &[0.0, 0.0]);
    }

    fn gram_of(r: &SparseMatrix) -> DenseMatrix {
        r.to_dense().gram()
    }

    #[test]
    fn zero_hessian_clamps_to_floor() {
        let mut h = Hierarchy::new(2);
        h.push_level("lin", vec![Box::new(Affine { a: DenseMatrix::identity(2), c: vec![0.0, 0.0] })]);
        let (r, _) = h.hierarchical_hessian_factor(&[0.0, 0.0], 0, &[vec![1.0, 1.0]]);
        let g = gram_of(&r);
        assert!((g[(0, 0)] - EIG_FLOOR).abs() < 1e-20 && g[(0, 1)].abs() < 1e-20);
    }

    #[test]
    fn quadratic_constraint_gives_scaled_identity() {
        // ∇²(x₁²+x₂²) = 2I, λ = 1 → R = √2·I up to rotation
        let mut h = Hierarchy::new(2);
        h.push_level("disk", vec![disk(Kind::Equality, 1.0)]);
        let (r, _) = h.hierarchical_hessian_factor(&[0.1, 0.2], 0, &[vec![1.0]]);
        let g = gram_of(&r);
        assert!((g[(0, 0)] - 2.0).abs() < 1e-14 && (g[(1, 1)] - 2.0).abs() < 1e-14 && g[(0, 1)].abs() < 1e-14);
        for i in 0..2 {
            let (_, v) = r.col(i);
            assert!(v.iter().all(|x| (x.abs() - 2f64.sqrt()).abs() < 1e-14 || x.abs() < 1e-14));
        }
    }

    #[test]
    fn diagonal_spd_hessian_has_square_root_factor() {
        // two blocks contributing 4 on x₁ and 9 on x₂
        let mut h = Hierarchy::new(2);
        h.push_level(
            "pair",
            vec![
                Box::new(Sphere { vars: vec![0], c: 0.0, n: 2, kind: Kind::Equality }),
                Box::new(Sphere { vars: vec![1], c: 0.0, n: 2, kind: Kind::Equality }),
            ],
        );
        let (r, _) = h.hierarchical_hessian_factor(&[1.0, 1.0], 0, &[vec![2.0, 4.5]]);
        let d = r.to_dense();
        assert!((d[(0, 0)] - 2.0).abs() < 1e-14 && (d[(1, 1)] - 3.0).abs() < 1e-14);
        assert!(d[(0, 1)].abs() < 1e-14 && d[(1, 0)].abs() < 1e-14);
    }

    #[test]
    fn missing_second_derivatives_fall_back() {
        struct NoHess;
        impl ConstraintBlock for NoHess {
            fn dim(&self) -> usize {
                1
            }
            fn kind(&self) -> Kind {
                Kind::Equality
            }
            fn eval(&self, x: &[f64]) -> Vec<f64> {
                vec![x[0]]
            }
            fn jacobian(&self, _x: &[f64]) -> SparseMatrix {
                SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0)])
            }
            fn variables(&self) -> Vec<usize> {
                vec![0, 1]
            }
        }
        let mut h = Hierarchy::new(2);
        h.push_level("x", vec![Box::new(NoHess)]);
        let (r, st) = h.hierarchical_hessian_factor(&[1.0, 0.0], 0, &[vec![1.0]]);
        assert_eq!(st, HessianStatus::FallbackToIdentity);
        let d = r.to_dense();
        assert!((d[(0, 0)] - 1e-2).abs() < 1e-15 && (d[(1, 1)] - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn fd_check_accepts_disk() {
        let b = Sphere { vars: vec![0, 1], c: 1.0, n: 2, kind: Kind::Equality };
        assert!(jacobian_fd_ratio(&b, &[0.3, -1.2], 1e-6) <= 1.0);
        assert!(hessian_fd_ratio(&b, &[0.3, -1.2], &[0.7], 1e-6).unwrap() <= 1.0);
    }
}
