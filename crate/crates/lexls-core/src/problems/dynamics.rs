//! Jacobian blocks of Euler-integrated dynamics.
//!
//! With `q̃ = q/Δt` and `τ̃ = Δt·τ` the stage residuals are
//! `f₁ = q̃_{t+1} − q̃_t − q̇_{t(+1)}` and
//! `f₂ = L(q̇_{t+1} − q̇_t) − Δt·G·(Sᵀτ − V + Jᵀγ)`.
//! Stage 0 refers to the known initial state, so its `E₁, E₂, D₁, D₂`
//! blocks have no columns.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numerics::dense::{dense_solve, DenseMatrix};
use crate::numerics::SparseMatrix;
use crate::turnback::{DynamicsDims, Integrator};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DynamicsMode {
    /// `L = M`, `G = I`
    Inverse,
    /// `L = I`, `G = M⁻¹`
    Forward,
}

/// Per-stage derivative blocks of `f₂`. The `f₁` blocks are `±I`.
#[derive(Clone, Debug, PartialEq)]
pub struct StageBlocks {
    /// `∂f₂/∂τ̃_t`, `n_qdot × n_tau`
    pub b: DenseMatrix,
    /// `∂f₂/∂γ_t`, `n_qdot × n_gamma`
    pub f: DenseMatrix,
    /// `∂f₂/∂q̃_t`
    pub d1: DenseMatrix,
    /// `∂f₂/∂q̇_t`
    pub d2: DenseMatrix,
    /// `∂f₂/∂q̃_{t+1}` (zero for explicit integration)
    pub d3: DenseMatrix,
    /// `∂f₂/∂q̇_{t+1}`
    pub d4: DenseMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsBlocks {
    pub dims: DynamicsDims,
    pub mode: DynamicsMode,
    pub stages: Vec<StageBlocks>,
}

fn check(m: &DenseMatrix, rows: usize, cols: usize) -> Result<(), Error> {
    if m.rows() != rows {
        return Err(Error::DimensionMismatch { expected: rows, found: m.rows() });
    }
    if m.cols() != cols {
        return Err(Error::DimensionMismatch { expected: cols, found: m.cols() });
    }
    Ok(())
}

fn place(trip: &mut Vec<(usize, usize, f64)>, m: &DenseMatrix, r0: usize, c0: usize) {
    for i in 0..m.rows() {
        for (j, &v) in m.row(i).iter().enumerate() {
            if v != 0.0 {
                trip.push((r0 + i, c0 + j, v));
            }
        }
    }
}

fn place_identity(trip: &mut Vec<(usize, usize, f64)>, n: usize, s: f64, r0: usize, c0: usize) {
    trip.extend((0..n).map(|k| (r0 + k, c0 + k, s)));
}

/// Places the stage blocks in the banded layout of `dims`.
pub fn assemble_dynamics_jacobian(blocks: &DynamicsBlocks, dims: &DynamicsDims) -> Result<SparseMatrix, Error> {
    if blocks.stages.len() != dims.horizon {
        return Err(Error::DimensionMismatch { expected: dims.horizon, found: blocks.stages.len() });
    }
    let (nq, nv, nt, ng) = (dims.n_q, dims.n_qdot, dims.n_tau, dims.n_gamma);
    let w = dims.stage_width();
    let mut trip = Vec::new();
    for (t, s) in blocks.stages.iter().enumerate() {
        for m in [&s.d1, &s.d2, &s.d3, &s.d4] {
            check(m, nv, nq)?;
        }
        check(&s.b, nv, nt)?;
        check(&s.f, nv, ng)?;
        if !(s.b.is_finite()
            && s.f.is_finite()
            && s.d1.is_finite()
            && s.d2.is_finite()
            && s.d3.is_finite()
            && s.d4.is_finite())
        {
            return Err(Error::NonFiniteEvaluation { level: t });
        }
        let r1 = t * dims.n_s();
        let r2 = r1 + nq;
        let c = t * w;
        let (c_tau, c_gamma, c_q, c_v) = (c, c + nt, c + nt + ng, c + nt + ng + nq);
        if t > 0 {
            let p = c - w;
            let (p_q, p_v) = (p + nt + ng, p + nt + ng + nq);
            place_identity(&mut trip, nq, -1.0, r1, p_q);
            if dims.integrator == Integrator::Explicit {
                place_identity(&mut trip, nq, -1.0, r1, p_v);
            }
            place(&mut trip, &s.d1, r2, p_q);
            place(&mut trip, &s.d2, r2, p_v);
        }
        place_identity(&mut trip, nq, 1.0, r1, c_q);
        if dims.integrator == Integrator::Implicit {
            place_identity(&mut trip, nq, -1.0, r1, c_v);
            place(&mut trip, &s.d3, r2, c_q);
        }
        place(&mut trip, &s.b, r2, c_tau);
        place(&mut trip, &s.f, r2, c_gamma);
        place(&mut trip, &s.d4, r2, c_v);
    }
    Ok(SparseMatrix::from_triplets(dims.rows(), dims.n(), &trip))
}

/// Random blocks in inverse mode.
pub fn random_dynamics_instance(dims: &DynamicsDims, seed: u64) -> DynamicsBlocks {
    random_dynamics_instance_with(dims, DynamicsMode::Inverse, seed)
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| scale * rng.gen_range(-1.0..1.0))
}

/// `M = I + XᵀX/n` with `X` uniform in `[−1, 1]`: eigenvalues lie in
/// `[1, 1 + n]`, so the condition number stays below `1 + n`.
fn random_inertia(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let x = uniform(rng, n, n, 1.0);
    let mut m = x.gram();
    m.scale(1.0 / n as f64);
    for i in 0..n {
        m[(i, i)] += 1.0;
    }
    m.symmetrize();
    m
}

fn inverse_times(m: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(b.rows(), b.cols());
    for j in 0..b.cols() {
        let x = dense_solve(m, &b.column(j)).expect("inertia is positive definite");
        out.set_column(j, &x);
    }
    out
}

/// Random stage blocks with well-conditioned inertia, the actuation
/// selecting the last `n_tau` degrees of freedom and a step of 0.01.
pub fn random_dynamics_instance_with(dims: &DynamicsDims, mode: DynamicsMode, seed: u64) -> DynamicsBlocks {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 0.01;
    let (nq, nt, ng) = (dims.n_q, dims.n_tau, dims.n_gamma);
    let mut st = DenseMatrix::zeros(nq, nt);
    for k in 0..nt {
        st[(nq - nt + k, k)] = 1.0;
    }
    let mut stages = Vec::with_capacity(dims.horizon);
    for _ in 0..dims.horizon {
        let m = random_inertia(&mut rng, nq);
        let jt = uniform(&mut rng, nq, ng, 1.0);
        let dv_dq = uniform(&mut rng, nq, nq, 1.0);
        let dv_dv = uniform(&mut rng, nq, nq, 1.0);
        let dv_dq_next = uniform(&mut rng, nq, nq, 1.0);
        let implicit = dims.integrator == Integrator::Implicit;
        // generalized force derivatives: ∂(Sᵀτ − V + Jᵀγ)/∂·
        let force_tau = st.clone();
        let force_gamma = jt;
        let mut force_q = dv_dq;
        force_q.scale(-1.0);
        let mut force_v = dv_dv;
        force_v.scale(-1.0);
        let mut force_q_next = dv_dq_next;
        force_q_next.scale(-1.0);
        let g = |x: &DenseMatrix| match mode {
            DynamicsMode::Inverse => x.clone(),
            DynamicsMode::Forward => inverse_times(&m, x),
        };
        let lmat = match mode {
            DynamicsMode::Inverse => m.clone(),
            DynamicsMode::Forward => DenseMatrix::identity(nq),
        };
        let mut b = g(&force_tau);
        b.scale(-1.0);
        let mut f = g(&force_gamma);
        f.scale(-dt);
        // q = Δt·q̃ contributes one more Δt
        let mut d1 = g(&force_q);
        d1.scale(-dt * dt);
        let mut gv = g(&force_v);
        gv.scale(-dt);
        let mut d2 = lmat.clone();
        d2.scale(-1.0);
        let mut d3 = DenseMatrix::zeros(nq, nq);
        let mut d4 = lmat;
        if implicit {
            d4.add_scaled(1.0, &gv);
            d3 = g(&force_q_next);
            d3.scale(-dt * dt);
            d1 = DenseMatrix::zeros(nq, nq);
        } else {
            d2.add_scaled(1.0, &gv);
        }
        stages.push(StageBlocks { b, f, d1, d2, d3, d4 });
    }
    DynamicsBlocks { dims: *dims, mode, stages }
}
