//! Cart-pole swing-up with explicit Euler transcription.
//!
//! The pole is a point mass at distance `ℓ` from the pivot; `θ = 0` is
//! upright and `θ = π` hanging. Decision variables use `q̃ = q/Δt` and
//! `τ̃ = Δt·F`. A virtual control on the pole joint makes the stage input
//! matrix square; it is pinned to zero on the top level.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::hierarchy::{ConstraintBlock, Hierarchy, Kind, Structure};
use crate::math;
use crate::numerics::SparseMatrix;
use crate::turnback::{add_virtual_controls, DynamicsDims, Integrator};

#[derive(Clone, Debug, PartialEq)]
pub struct CartPoleSpec {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_length: f64,
    pub force_bound: f64,
    pub cart_bound: f64,
    pub horizon: usize,
    pub dt: f64,
    pub gravity: f64,
    pub target: [f64; 2],
    pub q0: [f64; 2],
    pub qdot0: [f64; 2],
    /// Force applied over the first `guess_stages` stages of the rollout
    /// used as the starting point.
    pub guess_force: f64,
    pub guess_stages: usize,
}

impl Default for CartPoleSpec {
    fn default() -> Self {
        CartPoleSpec {
            cart_mass: 0.1,
            pole_mass: 0.1,
            pole_length: 0.25,
            force_bound: 100.0,
            cart_bound: 2.4,
            horizon: 75,
            dt: 0.0025,
            gravity: 9.81,
            target: [0.0, 0.5],
            q0: [0.0, core::f64::consts::PI],
            qdot0: [0.0, 0.0],
            guess_force: 5.0,
            guess_stages: 10,
        }
    }
}

/// `q̈` and its first derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct CartPoleDerivatives {
    pub qdd: [f64; 2],
    pub d_q: [[f64; 2]; 2],
    pub d_qdot: [[f64; 2]; 2],
    /// `∂q̈/∂u` for the generalized force `u = (F, pole torque)`.
    pub d_u: [[f64; 2]; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartPole {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_length: f64,
    pub gravity: f64,
}

impl CartPole {
    pub fn from_spec(s: &CartPoleSpec) -> Self {
        CartPole { cart_mass: s.cart_mass, pole_mass: s.pole_mass, pole_length: s.pole_length, gravity: s.gravity }
    }

    fn mass_matrix(&self, th: f64) -> [[f64; 2]; 2] {
        let b = self.pole_mass * self.pole_length;
        let off = b * math::cos(th);
        [[self.cart_mass + self.pole_mass, off], [off, b * self.pole_length]]
    }

    /// Forward dynamics for the generalized force `u`.
    pub fn forward(&self, q: [f64; 2], qd: [f64; 2], u: [f64; 2]) -> CartPoleDerivatives {
        let th = q[1];
        let (s, c) = (math::sin(th), math::cos(th));
        let b = self.pole_mass * self.pole_length;
        let m = self.mass_matrix(th);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let minv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
        let mul = |a: [[f64; 2]; 2], v: [f64; 2]| [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]];
        let bias = [-b * s * qd[1] * qd[1], -b * self.gravity * s];
        let qdd = mul(minv, [u[0] - bias[0], u[1] - bias[1]]);
        // ∂/∂θ of M q̈ = u − bias
        let dm_qdd = [-b * s * qdd[1], -b * s * qdd[0]];
        let dbias_th = [-b * c * qd[1] * qd[1], -b * self.gravity * c];
        let dth = mul(minv, [-dbias_th[0] - dm_qdd[0], -dbias_th[1] - dm_qdd[1]]);
        let dthd = mul(minv, [2.0 * b * s * qd[1], 0.0]);
        CartPoleDerivatives {
            qdd,
            d_q: [[0.0, dth[0]], [0.0, dth[1]]],
            d_qdot: [[0.0, dthd[0]], [0.0, dthd[1]]],
            d_u: minv,
        }
    }

    /// Kinetic plus potential energy.
    pub fn energy(&self, q: [f64; 2], qd: [f64; 2]) -> f64 {
        let m = self.mass_matrix(q[1]);
        let ke = 0.5 * (m[0][0] * qd[0] * qd[0] + 2.0 * m[0][1] * qd[0] * qd[1] + m[1][1] * qd[1] * qd[1]);
        ke + self.pole_mass * self.gravity * self.pole_length * math::cos(q[1])
    }

    pub fn tip(&self, q: [f64; 2]) -> [f64; 2] {
        [q[0] + self.pole_length * math::sin(q[1]), self.pole_length * math::cos(q[1])]
    }
}

/// Forward dynamics with force `F` on the cart only.
pub fn cartpole_dynamics(model: &CartPole, q: [f64; 2], qd: [f64; 2], force: f64) -> CartPoleDerivatives {
    model.forward(q, qd, [force, 0.0])
}

/// Column offsets within one stage of the augmented layout.
const VIRTUAL: usize = 0;
const FORCE: usize = 1;
const POS: usize = 2;
const VEL: usize = 4;
const WIDTH: usize = 6;

/// Explicit Euler dynamics over the augmented variables.
pub struct CartPoleDynamicsBlock {
    pub model: CartPole,
    pub dims: DynamicsDims,
    pub dt: f64,
    pub q0: [f64; 2],
    pub qdot0: [f64; 2],
}

impl CartPoleDynamicsBlock {
    /// Scaled previous state `(q̃_t, q̇_t)`, the initial state for `t = 0`.
    fn previous(&self, x: &[f64], t: usize) -> ([f64; 2], [f64; 2]) {
        if t == 0 {
            ([self.q0[0] / self.dt, self.q0[1] / self.dt], self.qdot0)
        } else {
            let c = (t - 1) * WIDTH;
            ([x[c + POS], x[c + POS + 1]], [x[c + VEL], x[c + VEL + 1]])
        }
    }

    fn stage_eval(&self, x: &[f64], t: usize) -> CartPoleDerivatives {
        let (qs, qd) = self.previous(x, t);
        let c = t * WIDTH;
        let u = [x[c + FORCE] / self.dt, x[c + VIRTUAL] / self.dt];
        self.model.forward([qs[0] * self.dt, qs[1] * self.dt], qd, [u[0], u[1]])
    }

    /// `λᵀ∇f₂` of stage `t` with respect to `(θ̃_t, θ̇_t, u*_t, τ̃_t)`.
    fn f2_local_grad(&self, x: &[f64], t: usize, local: [f64; 4], lam: [f64; 2]) -> [f64; 4] {
        let (qs, qd) = self.previous(x, t);
        let q = [qs[0] * self.dt, local[0] * self.dt];
        let d = self.model.forward(q, [qd[0], local[1]], [local[3] / self.dt, local[2] / self.dt]);
        let mut g = [0.0; 4];
        for i in 0..2 {
            let w = -self.dt * lam[i];
            g[0] += w * d.d_q[i][1] * self.dt;
            g[1] += w * d.d_qdot[i][1];
            g[2] += w * d.d_u[i][1] / self.dt;
            g[3] += w * d.d_u[i][0] / self.dt;
        }
        g
    }
}

impl ConstraintBlock for CartPoleDynamicsBlock {
    fn dim(&self) -> usize {
        self.dims.rows()
    }

    fn kind(&self) -> Kind {
        Kind::Equality
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut f = Vec::with_capacity(self.dim());
        for t in 0..self.dims.horizon {
            let (qs, qd) = self.previous(x, t);
            let c = t * WIDTH;
            let d = self.stage_eval(x, t);
            for k in 0..2 {
                f.push(x[c + POS + k] - qs[k] - qd[k]);
            }
            for k in 0..2 {
                f.push(x[c + VEL + k] - qd[k] - self.dt * d.qdd[k]);
            }
        }
        f
    }

    fn jacobian(&self, x: &[f64]) -> SparseMatrix {
        let n = self.dims.n();
        let mut trip = Vec::with_capacity(self.dims.horizon * 20);
        for t in 0..self.dims.horizon {
            let r = t * 4;
            let c = t * WIDTH;
            let d = self.stage_eval(x, t);
            for k in 0..2 {
                trip.push((r + k, c + POS + k, 1.0));
                trip.push((r + 2 + k, c + VEL + k, 1.0));
                trip.push((r + 2 + k, c + FORCE, -d.d_u[k][0]));
                trip.push((r + 2 + k, c + VIRTUAL, -d.d_u[k][1]));
            }
            if t > 0 {
                let p = c - WIDTH;
                for k in 0..2 {
                    trip.push((r + k, p + POS + k, -1.0));
                    trip.push((r + k, p + VEL + k, -1.0));
                    trip.push((r + 2 + k, p + VEL + k, -1.0));
                    for j in 0..2 {
                        trip.push((r + 2 + k, p + POS + j, -self.dt * self.dt * d.d_q[k][j]));
                        trip.push((r + 2 + k, p + VEL + j, -self.dt * d.d_qdot[k][j]));
                    }
                }
            }
        }
        let trip: Vec<_> = trip.into_iter().filter(|e| e.2 != 0.0).collect();
        SparseMatrix::from_triplets(self.dims.rows(), n, &trip)
    }

    fn hessian(&self, x: &[f64], lambda: &[f64]) -> Option<SparseMatrix> {
        let n = self.dims.n();
        let mut trip = Vec::new();
        for t in 0..self.dims.horizon {
            let lam = [lambda[t * 4 + 2], lambda[t * 4 + 3]];
            if lam == [0.0, 0.0] {
                continue;
            }
            let c = t * WIDTH;
            let (qs, qd) = self.previous(x, t);
            let local = [qs[1], qd[1], x[c + VIRTUAL], x[c + FORCE]];
            let cols: [Option<usize>; 4] = if t == 0 {
                [None, None, Some(c + VIRTUAL), Some(c + FORCE)]
            } else {
                let p = c - WIDTH;
                [Some(p + POS + 1), Some(p + VEL + 1), Some(c + VIRTUAL), Some(c + FORCE)]
            };
            for a in 0..4 {
                let Some(ca) = cols[a] else { continue };
                let h = 1e-6 * (1.0 + local[a].abs());
                let mut lp = local;
                lp[a] += h;
                let mut lm = local;
                lm[a] -= h;
                let gp = self.f2_local_grad(x, t, lp, lam);
                let gm = self.f2_local_grad(x, t, lm, lam);
                for b in 0..4 {
                    let Some(cb) = cols[b] else { continue };
                    let v = (gp[b] - gm[b]) / (2.0 * h);
                    if v != 0.0 {
                        trip.push((cb, ca, v));
                    }
                }
            }
        }
        let mut h = SparseMatrix::from_triplets(n, n, &trip);
        let ht = h.transpose();
        let sym: Vec<_> = h.triplets().chain(ht.triplets()).map(|(i, j, v)| (i, j, 0.5 * v)).collect();
        h = SparseMatrix::from_triplets(n, n, &sym);
        Some(h)
    }

    fn variables(&self) -> Vec<usize> {
        (0..self.dims.n()).collect()
    }

    fn structure(&self) -> Structure {
        Structure::EulerDynamics(self.dims)
    }
}

/// `sign·x[var] − bound ≤ 0` per row.
pub struct VariableBounds {
    pub n: usize,
    pub rows: Vec<(usize, f64, f64)>,
}

impl ConstraintBlock for VariableBounds {
    fn dim(&self) -> usize {
        self.rows.len()
    }

    fn kind(&self) -> Kind {
        Kind::Inequality
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|&(j, s, b)| s * x[j] - b).collect()
    }

    fn jacobian(&self, _x: &[f64]) -> SparseMatrix {
        let trip: Vec<_> = self.rows.iter().enumerate().map(|(i, &(j, s, _))| (i, j, s)).collect();
        SparseMatrix::from_triplets(self.rows.len(), self.n, &trip)
    }

    fn hessian(&self, _x: &[f64], _lambda: &[f64]) -> Option<SparseMatrix> {
        Some(SparseMatrix::zeros(self.n, self.n))
    }

    fn variables(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.rows.iter().map(|r| r.0).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Tip position minus target at every stage.
pub struct TipTask {
    pub model: CartPole,
    pub horizon: usize,
    pub dt: f64,
    pub target: [f64; 2],
}

impl ConstraintBlock for TipTask {
    fn dim(&self) -> usize {
        2 * self.horizon
    }

    fn kind(&self) -> Kind {
        Kind::Equality
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut f = Vec::with_capacity(self.dim());
        for t in 0..self.horizon {
            let c = t * WIDTH + POS;
            let p = self.model.tip([x[c] * self.dt, x[c + 1] * self.dt]);
            f.push(p[0] - self.target[0]);
            f.push(p[1] - self.target[1]);
        }
        f
    }

    fn jacobian(&self, x: &[f64]) -> SparseMatrix {
        let l = self.model.pole_length;
        let mut trip = Vec::with_capacity(3 * self.horizon);
        for t in 0..self.horizon {
            let c = t * WIDTH + POS;
            let th = x[c + 1] * self.dt;
            trip.push((2 * t, c, self.dt));
            trip.push((2 * t, c + 1, self.dt * l * math::cos(th)));
            trip.push((2 * t + 1, c + 1, -self.dt * l * math::sin(th)));
        }
        SparseMatrix::from_triplets(self.dim(), self.horizon * WIDTH, &trip)
    }

    fn hessian(&self, x: &[f64], lambda: &[f64]) -> Option<SparseMatrix> {
        let l = self.model.pole_length;
        let d2 = self.dt * self.dt;
        let trip: Vec<_> = (0..self.horizon)
            .map(|t| {
                let c = t * WIDTH + POS + 1;
                let th = x[c] * self.dt;
                let v = -d2 * l * (lambda[2 * t] * math::sin(th) + lambda[2 * t + 1] * math::cos(th));
                (c, c, v)
            })
            .collect();
        Some(SparseMatrix::from_triplets(self.horizon * WIDTH, self.horizon * WIDTH, &trip))
    }

    fn variables(&self) -> Vec<usize> {
        (0..self.horizon).flat_map(|t| [t * WIDTH + POS, t * WIDTH + POS + 1]).collect()
    }
}

/// `weight·x[j]` over the given columns.
pub struct Selection {
    pub n: usize,
    pub cols: Vec<usize>,
    pub weight: f64,
}

impl ConstraintBlock for Selection {
    fn dim(&self) -> usize {
        self.cols.len()
    }

    fn kind(&self) -> Kind {
        Kind::Equality
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.cols.iter().map(|&j| self.weight * x[j]).collect()
    }

    fn jacobian(&self, _x: &[f64]) -> SparseMatrix {
        let trip: Vec<_> = self.cols.iter().enumerate().map(|(i, &j)| (i, j, self.weight)).collect();
        SparseMatrix::from_triplets(self.cols.len(), self.n, &trip)
    }

    fn hessian(&self, _x: &[f64], _lambda: &[f64]) -> Option<SparseMatrix> {
        Some(SparseMatrix::zeros(self.n, self.n))
    }

    fn variables(&self) -> Vec<usize> {
        let mut v = self.cols.clone();
        v.sort_unstable();
        v
    }
}

/// The swing-up problem with its starting point.
pub struct CartPoleProblem {
    pub hierarchy: Hierarchy,
    /// Augmented (fully actuated) dimensions.
    pub dims: DynamicsDims,
    /// Dimensions before virtual controls.
    pub base_dims: DynamicsDims,
    pub virtual_columns: Vec<usize>,
    pub model: CartPole,
    pub spec: CartPoleSpec,
}

impl CartPoleProblem {
    /// Explicit Euler rollout with the given cart forces; virtual controls
    /// stay zero.
    pub fn rollout(&self, forces: &[f64]) -> Vec<f64> {
        let s = &self.spec;
        let mut x = vec![0.0; self.dims.n()];
        let (mut q, mut qd) = (s.q0, s.qdot0);
        for t in 0..s.horizon {
            let f = forces.get(t).copied().unwrap_or(0.0);
            let d = cartpole_dynamics(&self.model, q, qd, f);
            let qn = [q[0] + s.dt * qd[0], q[1] + s.dt * qd[1]];
            let qdn = [qd[0] + s.dt * d.qdd[0], qd[1] + s.dt * d.qdd[1]];
            let c = t * WIDTH;
            x[c + FORCE] = f * s.dt;
            x[c + POS] = qn[0] / s.dt;
            x[c + POS + 1] = qn[1] / s.dt;
            x[c + VEL] = qdn[0];
            x[c + VEL + 1] = qdn[1];
            q = qn;
            qd = qdn;
        }
        x
    }

    /// Rollout with the configured force kick.
    pub fn initial_guess(&self) -> Vec<f64> {
        let f: Vec<f64> = (0..self.spec.horizon)
            .map(|t| if t < self.spec.guess_stages { self.spec.guess_force } else { 0.0 })
            .collect();
        self.rollout(&f)
    }

    /// `‖tip − target‖₂` over the horizon.
    pub fn task_error(&self, x: &[f64]) -> f64 {
        let f = self.hierarchy.evaluate_level(2, x).expect("finite state");
        math::sqrt(f.iter().map(|v| v * v).sum())
    }

    /// Cart positions of every stage in metres.
    pub fn cart_positions(&self, x: &[f64]) -> Vec<f64> {
        (0..self.spec.horizon).map(|t| x[t * WIDTH + POS] * self.spec.dt).collect()
    }

    pub fn forces(&self, x: &[f64]) -> Vec<f64> {
        (0..self.spec.horizon).map(|t| x[t * WIDTH + FORCE] / self.spec.dt).collect()
    }
}

/// Levels: bounds (cart position, force, virtual controls pinned at
/// zero), dynamics, tip task, velocity regularization, force
/// regularization.
pub fn build_cartpole_hierarchy(spec: &CartPoleSpec) -> CartPoleProblem {
    let base_dims = DynamicsDims {
        horizon: spec.horizon,
        n_q: 2,
        n_qdot: 2,
        n_tau: 1,
        n_gamma: 0,
        n_ua: 1,
        integrator: Integrator::Explicit,
    };
    let virt = add_virtual_controls(&base_dims);
    let dims = virt.dims;
    let n = dims.n();
    let model = CartPole::from_spec(spec);
    let dt = spec.dt;
    let mut bounds = Vec::new();
    for t in 0..spec.horizon {
        let c = t * WIDTH;
        bounds.push((c + POS, 1.0, spec.cart_bound / dt));
        bounds.push((c + POS, -1.0, spec.cart_bound / dt));
        bounds.push((c + FORCE, 1.0, spec.force_bound * dt));
        bounds.push((c + FORCE, -1.0, spec.force_bound * dt));
        bounds.push((c + VIRTUAL, 1.0, 0.0));
        bounds.push((c + VIRTUAL, -1.0, 0.0));
    }
    let mut h = Hierarchy::new(n);
    h.push_level("bounds", vec![Box::new(VariableBounds { n, rows: bounds })]);
    h.push_level("dynamics", vec![Box::new(CartPoleDynamicsBlock { model, dims, dt, q0: spec.q0, qdot0: spec.qdot0 })]);
    h.push_level("tip", vec![Box::new(TipTask { model, horizon: spec.horizon, dt, target: spec.target })]);
    let vel: Vec<usize> = (0..spec.horizon).flat_map(|t| [t * WIDTH + VEL, t * WIDTH + VEL + 1]).collect();
    h.push_level("velocity", vec![Box::new(Selection { n, cols: vel, weight: 1.0 })]);
    let force: Vec<usize> = (0..spec.horizon).map(|t| t * WIDTH + FORCE).collect();
    h.push_level("force", vec![Box::new(Selection { n, cols: force, weight: 1.0 / dt })]);
    CartPoleProblem { hierarchy: h, dims, base_dims, virtual_columns: virt.columns, model, spec: spec.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{hessian_fd_ratio, jacobian_fd_ratio};

    fn model() -> CartPole {
        CartPole::from_spec(&CartPoleSpec::default())
    }

    #[test]
    fn equilibria_have_zero_acceleration() {
        let m = model();
        assert_eq!(cartpole_dynamics(&m, [0.0, 0.0], [0.0, 0.0], 0.0).qdd, [0.0, 0.0]);
        let d = cartpole_dynamics(&m, [0.0, core::f64::consts::PI], [0.0, 0.0], 0.0);
        assert!(d.qdd[0].abs() < 1e-14 && d.qdd[1].abs() < 1e-12);
    }

    #[test]
    fn horizontal_pole_matches_lagrangian() {
        // θ = π/2: M = [[0.2, 0], [0, 0.00625]], bias = [0, −0.245…]
        let m = model();
        let d = cartpole_dynamics(&m, [0.0, core::f64::consts::FRAC_PI_2], [0.0, 0.0], 0.0);
        let expect_th = 0.1 * 9.81 * 0.25 / (0.1 * 0.25 * 0.25);
        assert!(d.qdd[0].abs() < 1e-8);
        assert!((d.qdd[1] - expect_th).abs() < 1e-8);
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let m = model();
        let (q, qd, u) = ([0.3, 2.0], [0.4, -1.3], [2.0, 0.5]);
        let d = m.forward(q, qd, u);
        let h = 1e-6;
        for j in 0..2 {
            let (mut qp, mut qm) = (q, q);
            qp[j] += h;
            qm[j] -= h;
            let (fp, fm) = (m.forward(qp, qd, u).qdd, m.forward(qm, qd, u).qdd);
            let (mut vp, mut vm) = (qd, qd);
            vp[j] += h;
            vm[j] -= h;
            let (gp, gm) = (m.forward(q, vp, u).qdd, m.forward(q, vm, u).qdd);
            let (mut up, mut um) = (u, u);
            up[j] += h;
            um[j] -= h;
            let (kp, km) = (m.forward(q, qd, up).qdd, m.forward(q, qd, um).qdd);
            for i in 0..2 {
                assert!(((fp[i] - fm[i]) / (2.0 * h) - d.d_q[i][j]).abs() < 1e-5);
                assert!(((gp[i] - gm[i]) / (2.0 * h) - d.d_qdot[i][j]).abs() < 1e-5);
                assert!(((kp[i] - km[i]) / (2.0 * h) - d.d_u[i][j]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn sizes_before_and_after_virtual_controls() {
        let p = build_cartpole_hierarchy(&CartPoleSpec::default());
        assert_eq!(p.base_dims.n(), 375);
        assert_eq!(p.hierarchy.n(), 450);
        assert_eq!(p.hierarchy.p(), 5);
    }

    #[test]
    fn rollout_has_zero_defect() {
        let p = build_cartpole_hierarchy(&CartPoleSpec::default());
        let x = p.initial_guess();
        let f = p.hierarchy.evaluate_level(1, &x).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-9));
        let zero = vec![0.0; p.hierarchy.n()];
        let f0 = p.hierarchy.evaluate_level(1, &zero).unwrap();
        assert!((f0[1] + core::f64::consts::PI / 0.0025).abs() < 1e-9);
    }

    #[test]
    fn block_derivatives_match_differences() {
        let spec = CartPoleSpec { horizon: 4, ..CartPoleSpec::default() };
        let p = build_cartpole_hierarchy(&spec);
        let mut x = p.initial_guess();
        for (i, v) in x.iter_mut().enumerate() {
            *v += 0.01 * (i as f64).sin();
        }
        for lvl in p.hierarchy.levels() {
            for b in &lvl.blocks {
                assert!(jacobian_fd_ratio(b.as_ref(), &x, 1e-6) < 1.0);
                let lam: Vec<f64> = (0..b.dim()).map(|i| 0.5 + 0.1 * i as f64).collect();
                assert!(hessian_fd_ratio(b.as_ref(), &x, &lam, 1e-5).unwrap() < 1.0);
            }
        }
    }
}
