//! Per-level ADMM on the linearized hierarchy.
//!
//! Level `l` is solved over `Δz` in the nullspace `N` of all rows fixed by
//! higher levels, `Δx = Δx_prev + N·Δz`. Inequalities are stored negated,
//! `G Δz − v ≥ g` with `G = −Ã` and `g = −b̆`, so the slack of a violated
//! own row is negative and the projection of every slack is `max(g, ·)`.
//! Reported slacks use the row convention `Ã Δz − b̆ = v`.

use alloc::vec;
use alloc::vec::Vec;

use crate::hierarchy::{ActiveSetState, HlspData, Kind, Origin, RowRef};
use crate::numerics::dense::{dense_nullspace, norm_inf, DenseLu};
use crate::numerics::lu::dense_lu;
use crate::numerics::qp::dual_active_set_qp;
use crate::numerics::{cg_least_squares, CgResult, DenseMatrix, SparseMatrix, SpdFactor, TriangularPrecond};
use crate::turnback::{reduced_dims, turnback_euler_threaded, turnback_general, DynamicsDims};
use crate::{math, Error};

/// Level index of the rows of the trust-region box: row `2i` is `Δxᵢ ≤ r`,
/// row `2i + 1` is `−Δxᵢ ≤ r`.
pub const TRUST_LEVEL: usize = usize::MAX;

/// Relative magnitude below which an entry of a projected row is ignored
/// when looking for single-variable rows.
const SELECTION_TOL: f64 = 1e-14;

/// Re-centrings of the proximal term in the exact level solve.
const PROXIMAL_ROUNDS: usize = 8;

/// Relative pivot tolerance of the dense nullspace.
const DENSE_RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct AdmmSettings {
    pub rho0: f64,
    pub sigma0: f64,
    /// Over-relaxation.
    pub alpha: f64,
    /// Activation threshold.
    pub nu: f64,
    /// KKT convergence threshold.
    pub eta: f64,
    pub max_iter: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Iterations between residual-balancing checks; 0 disables them.
    pub rho_interval: usize,
    /// Factor by which the balanced ρ must differ before it is applied.
    pub rho_trigger: f64,
    /// Growth of the KKT norm over its best value since the last step-size
    /// change that counts as divergence.
    pub divergence_factor: f64,
    /// Re-solve the converged active-set guess exactly.
    pub polish: bool,
    /// Active-set corrections tried while polishing.
    pub polish_rounds: usize,
    /// Up to this many projected variables, non-dynamics bases use dense QR.
    pub dense_cutoff: usize,
    pub threads: usize,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        AdmmSettings {
            rho0: 0.1,
            sigma0: 1e-6,
            alpha: 1.6,
            nu: 1e-6,
            eta: 1e-6,
            max_iter: 1500,
            rho_min: 1e-4,
            rho_max: 1e4,
            rho_interval: 25,
            rho_trigger: 5.0,
            divergence_factor: 10.0,
            polish: true,
            polish_rounds: 10,
            dense_cutoff: 200,
            threads: 1,
        }
    }
}

impl AdmmSettings {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::InvalidSettings("alpha must lie in (0, 2)"));
        }
        if !(self.rho0 > 0.0 && self.sigma0 > 0.0 && self.nu > 0.0 && self.eta > 0.0) {
            return Err(Error::InvalidSettings("rho0, sigma0, nu and eta must be positive"));
        }
        if !(self.rho_min > 0.0 && self.rho_min <= self.rho0 && self.rho0 <= self.rho_max) {
            return Err(Error::InvalidSettings("rho0 must lie in [rho_min, rho_max]"));
        }
        if !(self.rho_trigger >= 1.0 && self.divergence_factor > 1.0) {
            return Err(Error::InvalidSettings("rho_trigger must be at least 1 and divergence_factor above 1"));
        }
        if self.threads == 0 {
            return Err(Error::InvalidSettings("threads must be positive"));
        }
        Ok(())
    }
}

/// One level in projected coordinates.
#[derive(Clone, Debug)]
pub struct ProjectedLevel {
    /// Equalities `Ã Δz − b̆ = v`.
    pub eq: SparseMatrix,
    pub eq_rhs: Vec<f64>,
    /// Own inequalities, negated: `G Δz − v ≥ g`.
    pub own: SparseMatrix,
    pub own_lo: Vec<f64>,
    /// Inactive inequalities of higher levels, negated: `G Δz ≥ g`.
    pub inact: SparseMatrix,
    pub inact_lo: Vec<f64>,
}

impl ProjectedLevel {
    pub fn n(&self) -> usize {
        self.eq.cols()
    }

    /// `Ã_E Δz − b̆_E`.
    pub fn eq_slack(&self, z: &[f64]) -> Vec<f64> {
        let mut r = self.eq.mul_vec(z);
        for (x, b) in r.iter_mut().zip(&self.eq_rhs) {
            *x -= b;
        }
        r
    }
}

/// Iterate of the per-level ADMM. Inequality quantities use the negated
/// convention of [`ProjectedLevel`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdmmLevelState {
    pub z: Vec<f64>,
    pub z_hat: Vec<f64>,
    pub v_own: Vec<f64>,
    pub w_own: Vec<f64>,
    pub w_inact: Vec<f64>,
    /// Scaled duals; the unscaled multipliers are `−ρ·υ`.
    pub u_own: Vec<f64>,
    pub u_inact: Vec<f64>,
    pub rho: f64,
    pub sigma: f64,
    pub iterations: usize,
    pub kkt_norm: f64,
}

impl AdmmLevelState {
    /// Zero primal and dual iterate with the slacks projected onto their
    /// bounds.
    pub fn zero(p: &ProjectedLevel, rho: f64, sigma: f64) -> Self {
        let (n, mi, mk) = (p.n(), p.own_lo.len(), p.inact_lo.len());
        AdmmLevelState {
            z: vec![0.0; n],
            z_hat: vec![0.0; n],
            v_own: vec![0.0; mi],
            w_own: p.own_lo.iter().map(|g| g.max(0.0)).collect(),
            w_inact: p.inact_lo.iter().map(|g| g.max(0.0)).collect(),
            u_own: vec![0.0; mi],
            u_inact: vec![0.0; mk],
            rho,
            sigma,
            iterations: 0,
            kkt_norm: f64::INFINITY,
        }
    }

    fn fits(&self, p: &ProjectedLevel) -> bool {
        self.z.len() == p.n() && self.w_own.len() == p.own_lo.len() && self.w_inact.len() == p.inact_lo.len()
    }

    /// Multipliers of the inactive rows of higher levels, nonnegative at a
    /// fixed point.
    pub fn inact_multipliers(&self) -> Vec<f64> {
        self.u_inact.iter().map(|u| -self.rho * u).collect()
    }

    pub fn own_multipliers(&self) -> Vec<f64> {
        self.u_own.iter().map(|u| -self.rho * u).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LevelStatus {
    Converged,
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelReport {
    pub status: LevelStatus,
    pub iterations: usize,
    pub kkt_norm: f64,
    pub rho_history: Vec<f64>,
    pub sigma: f64,
    /// Number of divergence resets.
    pub resets: usize,
    pub polished: bool,
}

#[derive(Clone, Copy, Debug)]
struct Residuals {
    primal: f64,
    dual: f64,
    primal_scale: f64,
    dual_scale: f64,
}

fn residuals(p: &ProjectedLevel, s: &AdmmLevelState) -> Residuals {
    let gz_own = p.own.mul_vec(&s.z);
    let gz_in = p.inact.mul_vec(&s.z);
    let mut primal: f64 = 0.0;
    let mut pscale: f64 = 0.0;
    for i in 0..gz_own.len() {
        let ax = gz_own[i] - s.v_own[i];
        primal = primal.max((ax - s.w_own[i]).abs());
        pscale = pscale.max(ax.abs()).max(s.w_own[i].abs());
    }
    for i in 0..gz_in.len() {
        primal = primal.max((gz_in[i] - s.w_inact[i]).abs());
        pscale = pscale.max(gz_in[i].abs()).max(s.w_inact[i].abs());
    }
    let y_own: Vec<f64> = s.u_own.iter().map(|u| s.rho * u).collect();
    let y_in: Vec<f64> = s.u_inact.iter().map(|u| s.rho * u).collect();
    let grad = p.eq.tr_mul_vec(&p.eq_slack(&s.z));
    let mut aty = p.own.tr_mul_vec(&y_own);
    for (a, b) in aty.iter_mut().zip(p.inact.tr_mul_vec(&y_in)) {
        *a += b;
    }
    let mut dual: f64 = 0.0;
    let dscale = norm_inf(&grad).max(norm_inf(&aty)).max(norm_inf(&s.v_own)).max(norm_inf(&y_own));
    for i in 0..grad.len() {
        dual = dual.max((grad[i] + aty[i]).abs());
    }
    for i in 0..y_own.len() {
        dual = dual.max((s.v_own[i] - y_own[i]).abs());
    }
    Residuals { primal, dual, primal_scale: pscale, dual_scale: dscale }
}

struct Grams {
    eq: DenseMatrix,
    own: DenseMatrix,
    inact: DenseMatrix,
}

impl Grams {
    fn new(p: &ProjectedLevel) -> Self {
        Grams { eq: p.eq.gram(), own: p.own.gram(), inact: p.inact.gram() }
    }

    fn factor(&self, rho: f64, sigma: f64) -> Result<SpdFactor, Error> {
        let n = self.eq.rows();
        let c = rho / (1.0 + rho);
        let mut m = self.eq.clone();
        m.add_scaled(c, &self.own);
        m.add_scaled(rho, &self.inact);
        for i in 0..n {
            m[(i, i)] += sigma;
        }
        SpdFactor::new(&m)
    }
}

/// Runs the alternating updates from `state` until the KKT norm drops
/// below `η` or the iteration budget is spent. A state that already meets
/// the threshold is returned after zero iterations.
pub fn solve_level(p: &ProjectedLevel, state: &mut AdmmLevelState, s: &AdmmSettings) -> Result<LevelReport, Error> {
    assert!(state.fits(p));
    let n = p.n();
    let mut report = LevelReport {
        status: LevelStatus::MaxIterations,
        iterations: 0,
        kkt_norm: f64::INFINITY,
        rho_history: vec![state.rho],
        sigma: state.sigma,
        resets: 0,
        polished: false,
    };
    let start = state.iterations;
    let r0 = residuals(p, state);
    state.kkt_norm = r0.primal.max(r0.dual);
    if state.kkt_norm < s.eta {
        report.status = LevelStatus::Converged;
        report.kkt_norm = state.kkt_norm;
        return Ok(report);
    }
    let grams = Grams::new(p);
    let mut factor = grams.factor(state.rho, state.sigma)?;
    let rhs_eq = p.eq.tr_mul_vec(&p.eq_rhs);
    let alpha = s.alpha;
    let mut best = f64::INFINITY;
    while state.iterations - start < s.max_iter {
        let rho = state.rho;
        let c = rho / (1.0 + rho);
        let d_own: Vec<f64> = state.w_own.iter().zip(&state.u_own).map(|(w, u)| c * (w - u)).collect();
        let d_in: Vec<f64> = state.w_inact.iter().zip(&state.u_inact).map(|(w, u)| rho * (w - u)).collect();
        let mut r = rhs_eq.clone();
        for (ri, x) in r.iter_mut().zip(p.own.tr_mul_vec(&d_own)) {
            *ri += x;
        }
        for (ri, x) in r.iter_mut().zip(p.inact.tr_mul_vec(&d_in)) {
            *ri += x;
        }
        for i in 0..n {
            r[i] += state.sigma * state.z[i];
        }
        let z_hat = factor.solve(&r);
        let gz_own = p.own.mul_vec(&z_hat);
        let gz_in = p.inact.mul_vec(&z_hat);
        for i in 0..n {
            state.z[i] = alpha * z_hat[i] + (1.0 - alpha) * state.z[i];
        }
        for i in 0..gz_own.len() {
            let v_t = c * (gz_own[i] - state.w_own[i] + state.u_own[i]);
            let w_hat = gz_own[i] - v_t;
            let relaxed = alpha * w_hat + (1.0 - alpha) * state.w_own[i];
            let w_new = p.own_lo[i].max(relaxed + state.u_own[i]);
            state.u_own[i] += relaxed - w_new;
            state.w_own[i] = w_new;
            state.v_own[i] = alpha * v_t + (1.0 - alpha) * state.v_own[i];
        }
        for i in 0..gz_in.len() {
            let relaxed = alpha * gz_in[i] + (1.0 - alpha) * state.w_inact[i];
            let w_new = p.inact_lo[i].max(relaxed + state.u_inact[i]);
            state.u_inact[i] += relaxed - w_new;
            state.w_inact[i] = w_new;
        }
        state.z_hat = z_hat;
        state.iterations += 1;
        let res = residuals(p, state);
        state.kkt_norm = res.primal.max(res.dual);
        if !state.kkt_norm.is_finite() {
            return Err(Error::NonFiniteEvaluation { level: 0 });
        }
        if state.kkt_norm < s.eta {
            report.status = LevelStatus::Converged;
            break;
        }
        let mut new_rho = None;
        if state.kkt_norm > s.divergence_factor * best {
            state.sigma *= 10.0;
            new_rho = Some(s.rho0);
            report.resets += 1;
        } else {
            best = best.min(state.kkt_norm);
            let k = state.iterations - start;
            if s.rho_interval > 0 && k % s.rho_interval == 0 {
                let num = res.primal / res.primal_scale.max(1e-300);
                let den = res.dual / res.dual_scale.max(1e-300);
                if num > 0.0 && den > 0.0 {
                    let cand = (rho * math::sqrt(num / den)).clamp(s.rho_min, s.rho_max);
                    if cand > rho * s.rho_trigger || cand < rho / s.rho_trigger {
                        new_rho = Some(cand);
                    }
                }
            }
        }
        if let Some(nr) = new_rho {
            let scale = state.rho / nr;
            state.u_own.iter_mut().for_each(|u| *u *= scale);
            state.u_inact.iter_mut().for_each(|u| *u *= scale);
            state.rho = nr;
            factor = grams.factor(state.rho, state.sigma)?;
            report.rho_history.push(nr);
            best = f64::INFINITY;
        }
    }
    report.iterations = state.iterations - start;
    report.kkt_norm = state.kkt_norm;
    report.sigma = state.sigma;
    Ok(report)
}

/// Subset of `rows` of `a` with linearly independent, nonzero rows,
/// picked by complete pivoting on the row-normalized matrix.
fn independent_rows(a: &SparseMatrix, rows: &[usize]) -> Vec<usize> {
    if rows.is_empty() {
        return Vec::new();
    }
    let mut d = a.select_rows(rows).to_dense();
    for i in 0..d.rows() {
        let nrm = math::sqrt(d.row(i).iter().map(|v| v * v).sum());
        if nrm > 0.0 {
            d.row_mut(i).iter_mut().for_each(|v| *v /= nrm);
        }
    }
    let lu = dense_lu(&d, 1e-9);
    let mut out: Vec<usize> = lu.row_perm[..lu.rank].iter().map(|&k| rows[k]).collect();
    out.sort_unstable();
    out
}

/// Solves the equality-constrained least squares for the given sets:
/// own rows in `own_set` are objective rows at their bound, promoted rows
/// in `act_set` are equality constraints. Returns `z` and the duals of the
/// active rows.
fn polish_solve(
    p: &ProjectedLevel,
    anchor: &[f64],
    own_set: &[usize],
    act_set: &[usize],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = p.n();
    let own_a = p.own.select_rows(own_set);
    let own_g: Vec<f64> = own_set.iter().map(|&i| p.own_lo[i]).collect();
    let act_a = p.inact.select_rows(act_set);
    let act_g: Vec<f64> = act_set.iter().map(|&i| p.inact_lo[i]).collect();
    let m = act_set.len();
    let mut h = p.eq.gram();
    h.add_scaled(1.0, &own_a.gram());
    let mut rhs0 = p.eq.tr_mul_vec(&p.eq_rhs);
    for (a, b) in rhs0.iter_mut().zip(own_a.tr_mul_vec(&own_g)) {
        *a += b;
    }
    rhs0.extend_from_slice(&act_g);
    let dim = n + m;
    let mut k0 = DenseMatrix::zeros(dim, dim);
    for i in 0..n {
        for j in 0..n {
            k0[(i, j)] = h[(i, j)];
        }
    }
    for (r, c, v) in act_a.triplets() {
        k0[(n + r, c)] = v;
        k0[(c, n + r)] = v;
    }
    let scale = (0..n).map(|i| h[(i, i)]).fold(1.0, f64::max);
    let delta = 1e-10 * scale;
    let mut kd = k0.clone();
    for i in 0..n {
        kd[(i, i)] += delta;
    }
    for i in n..dim {
        kd[(i, i)] -= delta;
    }
    let lu = DenseLu::new(&kd)?;
    let mut rhs = rhs0.clone();
    for i in 0..n {
        rhs[i] += delta * anchor[i];
    }
    let mut sol = lu.solve(&rhs);
    for _ in 0..5 {
        let ks = k0.mul_vec(&sol);
        let res: Vec<f64> = rhs0.iter().zip(&ks).map(|(a, b)| a - b).collect();
        if norm_inf(&res) <= 1e-14 * (1.0 + norm_inf(&rhs0)) {
            break;
        }
        let d = lu.solve(&res);
        for (x, dx) in sol.iter_mut().zip(d) {
            *x += dx;
        }
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let y = sol.split_off(n);
    Some((sol, y))
}

/// Replaces the ADMM iterate by the exact solution on its guessed active
/// set. When the guess cannot be repaired the level is solved as a dense
/// QP. On success the state is made consistent so that a warm re-solve
/// stops at once.
pub fn polish(p: &ProjectedLevel, state: &mut AdmmLevelState, s: &AdmmSettings) -> bool {
    let gz_own = p.own.mul_vec(&state.z);
    let lam_in = state.inact_multipliers();
    let own_in: Vec<bool> = (0..gz_own.len()).map(|i| gz_own[i] - p.own_lo[i] < 0.0).collect();
    let act_in: Vec<bool> =
        (0..lam_in.len()).map(|i| lam_in[i] > 0.0 && state.w_inact[i] - p.inact_lo[i] < lam_in[i]).collect();
    let anchor = state.z.clone();
    if let Some((z, y_in)) = refine_active_set(p, &anchor, own_in, act_in, s) {
        set_solution(p, state, z, &y_in);
        return true;
    }
    exact_level_qp(p, state, s)
}

/// Equality-constrained solves on an active-set guess, corrected a few
/// times: rows with a multiplier of the wrong sign leave the set, violated
/// rows join it. Returns `z` and the duals of all promoted rows.
fn refine_active_set(
    p: &ProjectedLevel,
    anchor: &[f64],
    mut own_in: Vec<bool>,
    mut act_in: Vec<bool>,
    s: &AdmmSettings,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let tol_p = 0.5 * s.eta;
    for _ in 0..s.polish_rounds.max(1) {
        let own_set: Vec<usize> = (0..own_in.len()).filter(|&i| own_in[i]).collect();
        let act_all: Vec<usize> = (0..act_in.len()).filter(|&i| act_in[i]).collect();
        let act_set = independent_rows(&p.inact, &act_all);
        let (z, y_act) = polish_solve(p, anchor, &own_set, &act_set)?;
        let tol_d = 10.0 * s.eta * (1.0 + norm_inf(&y_act));
        let mut changed = false;
        // y holds the dual of G z ≥ g in the sign of the ADMM duals
        for (k, &i) in act_set.iter().enumerate() {
            if y_act[k] > tol_d {
                act_in[i] = false;
                changed = true;
            }
        }
        let gz_own = p.own.mul_vec(&z);
        for i in 0..gz_own.len() {
            let gap = gz_own[i] - p.own_lo[i];
            if (own_in[i] && gap > tol_p) || (!own_in[i] && gap < -tol_p) {
                own_in[i] = !own_in[i];
                changed = true;
            }
        }
        let gz_in = p.inact.mul_vec(&z);
        let mut violated = false;
        for i in 0..gz_in.len() {
            if gz_in[i] - p.inact_lo[i] < -tol_p {
                violated = true;
                if !act_in[i] {
                    act_in[i] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            if violated {
                return None;
            }
            let mut y_in = vec![0.0; p.inact_lo.len()];
            for (k, &i) in act_set.iter().enumerate() {
                y_in[i] = y_act[k];
            }
            return Some((z, y_in));
        }
    }
    None
}

/// Makes the ADMM iterate consistent with the primal `z` and the duals
/// `y_in` of the promoted rows, so that a warm re-solve stops at once.
fn set_solution(p: &ProjectedLevel, state: &mut AdmmLevelState, z: Vec<f64>, y_in: &[f64]) {
    let gz_own = p.own.mul_vec(&z);
    let gz_in = p.inact.mul_vec(&z);
    let rho = state.rho;
    for i in 0..gz_own.len() {
        let v = (gz_own[i] - p.own_lo[i]).min(0.0);
        state.v_own[i] = v;
        state.w_own[i] = p.own_lo[i].max(gz_own[i] - v);
        state.u_own[i] = v / rho;
    }
    for i in 0..gz_in.len() {
        state.w_inact[i] = p.inact_lo[i].max(gz_in[i]);
        state.u_inact[i] = y_in[i] / rho;
    }
    state.z_hat = z.clone();
    state.z = z;
    let r = residuals(p, state);
    state.kkt_norm = r.primal.max(r.dual);
}

/// Solves the level exactly as a dense QP over `(Δz, v_own)` when the
/// active-set guess cannot be repaired. A weak proximal term keeps the QP
/// strictly convex; it is re-centred on each solution until the KKT norm
/// of the unregularized level meets `η`.
fn exact_level_qp(p: &ProjectedLevel, state: &mut AdmmLevelState, s: &AdmmSettings) -> bool {
    let n = p.n();
    let mi = p.own_lo.len();
    let mk = p.inact_lo.len();
    let dim = n + mi;
    let gram = p.eq.gram();
    let scale = (0..n).map(|i| gram[(i, i)]).fold(1.0, f64::max);
    let delta = 1e-10 * scale;
    let mut h = DenseMatrix::zeros(dim, dim);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = gram[(i, j)];
        }
        h[(i, i)] += delta;
    }
    for i in n..dim {
        h[(i, i)] = 1.0;
    }
    let grad0 = p.eq.tr_mul_vec(&p.eq_rhs);
    let mut a = DenseMatrix::zeros(mi + mk, dim);
    for (r, col, v) in p.own.triplets() {
        a[(r, col)] = v;
    }
    for r in 0..mi {
        a[(r, n + r)] = -1.0;
    }
    for (r, col, v) in p.inact.triplets() {
        a[(mi + r, col)] = v;
    }
    let b: Vec<f64> = p.own_lo.iter().chain(&p.inact_lo).copied().collect();
    let mut anchor = state.z.clone();
    let mut solved = false;
    for _ in 0..PROXIMAL_ROUNDS {
        let mut c = vec![0.0; dim];
        for i in 0..n {
            c[i] = -grad0[i] - delta * anchor[i];
        }
        let Ok(sol) = dual_active_set_qp(&h, &c, &a, &b, 0.1 * s.eta, 20 * (dim + mi + mk)) else {
            break;
        };
        let mut y_in = vec![0.0; mk];
        for (&i, &lam) in sol.active.iter().zip(&sol.multipliers) {
            if i >= mi {
                y_in[i - mi] = -lam;
            }
        }
        let mut own_in = vec![false; mi];
        let mut act_in = vec![false; mk];
        for (&i, &lam) in sol.active.iter().zip(&sol.multipliers) {
            if i < mi {
                own_in[i] = lam > 0.0;
            } else {
                act_in[i - mi] = true;
            }
        }
        let mut z = sol.x;
        z.truncate(n);
        anchor.copy_from_slice(&z);
        set_solution(p, state, z, &y_in);
        solved = true;
        if state.kkt_norm < s.eta {
            break;
        }
        // the exact active set removes the proximal bias
        if let Some((z, y_in)) = refine_active_set(p, &anchor, own_in, act_in, s) {
            let mut trial = state.clone();
            set_solution(p, &mut trial, z, &y_in);
            if trial.kkt_norm < state.kkt_norm {
                *state = trial;
                if state.kkt_norm < s.eta {
                    break;
                }
            }
        }
    }
    solved
}

/// Activation decision for one inequality row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Activation {
    pub row: RowRef,
    pub origin: Origin,
    /// Distance of the slack from its bound.
    pub slack: f64,
    /// Row residual `Ã Δz − b̆` clamped at zero from below; positive when
    /// the row is violated.
    pub residual: f64,
    pub multiplier: f64,
    /// `slack < ν` and the negated residual below `−ν` (promoted rows: the
    /// multiplier above `ν`).
    pub sign_test: bool,
    /// `slack < ν` and either `|residual| > ν` or the multiplier above `ν`.
    pub magnitude_test: bool,
    pub active: bool,
}

/// Classifies the own inequalities and the promoted rows of a solved
/// level. Returns `(promoted, own)` decisions.
pub fn update_active_sets(p: &ProjectedLevel, state: &AdmmLevelState, nu: f64) -> (Vec<bool>, Vec<bool>) {
    let (prom, own) = activation_records(p, state, nu, &[], &[]);
    (prom.iter().map(|a| a.active).collect(), own.iter().map(|a| a.active).collect())
}

fn activation_records(
    p: &ProjectedLevel,
    state: &AdmmLevelState,
    nu: f64,
    inact_refs: &[RowRef],
    own_refs: &[RowRef],
) -> (Vec<Activation>, Vec<Activation>) {
    let placeholder = RowRef { level: 0, row: 0 };
    let lam_in = state.inact_multipliers();
    let prom = (0..p.inact_lo.len())
        .map(|i| {
            let slack = state.w_inact[i] - p.inact_lo[i];
            let test = slack < nu && lam_in[i] > nu;
            Activation {
                row: inact_refs.get(i).copied().unwrap_or(placeholder),
                origin: Origin::Promoted,
                slack,
                residual: 0.0,
                multiplier: lam_in[i],
                sign_test: test,
                magnitude_test: test,
                active: test,
            }
        })
        .collect();
    let lam_own = state.own_multipliers();
    let own = (0..p.own_lo.len())
        .map(|i| {
            let slack = state.w_own[i] - p.own_lo[i];
            let v = state.v_own[i];
            let sign_test = slack < nu && v < -nu;
            let magnitude_test = slack < nu && (v.abs() > nu || lam_own[i] > nu);
            Activation {
                row: own_refs.get(i).copied().unwrap_or(placeholder),
                origin: Origin::Own,
                slack,
                residual: -v,
                multiplier: lam_own[i],
                sign_test,
                magnitude_test,
                active: magnitude_test,
            }
        })
        .collect();
    (prom, own)
}

/// Minimum-norm `λ` minimizing `‖Aᵀλ − target‖₂` for the stacked active
/// rows `A`.
pub fn compute_multipliers(
    active_rows: &SparseMatrix,
    target: &[f64],
    precond: Option<&TriangularPrecond>,
    tol: f64,
    max_iter: usize,
) -> CgResult {
    cg_least_squares(active_rows, target, precond, tol, max_iter)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WarmMode {
    /// All primal and dual sub-steps start at zero with default step sizes.
    Fresh,
    /// Zero sub-steps, per-level `ρ` carried over; `σ` restarts at `σ₀`
    /// since its growth only repairs divergence on the data it saw.
    StepSizes,
    /// Full per-level iterate carried over, for re-solving the same data.
    Resolve,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WarmStart {
    pub levels: Vec<AdmmLevelState>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NullspaceKind {
    Unchanged,
    Selection,
    Dynamics,
    General,
    Dense,
}

#[derive(Clone, Debug)]
pub struct LevelSolution {
    pub level: usize,
    /// Projected step of this level.
    pub dz: Vec<f64>,
    /// Slack per row, `A Δx − b` at the level's solution; zero for
    /// satisfied inequalities.
    pub v_star: Vec<f64>,
    /// Rows of higher levels activated here, in activation order.
    pub activated_promoted: Vec<RowRef>,
    /// Own rows fixed here (all equalities and the active inequalities).
    pub activated_own: Vec<usize>,
    pub free_before: usize,
    pub free_after: usize,
    pub nullspace: NullspaceKind,
    /// `‖A_new·N‖∞` for the rows fixed at this level.
    pub nullspace_residual: f64,
    pub report: LevelReport,
    pub activations: Vec<Activation>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActiveRow {
    pub row: RowRef,
    pub origin: Origin,
    /// Level at which the row was fixed.
    pub level: usize,
    /// Value `A_row Δx` is held at.
    pub target: f64,
}

#[derive(Clone, Debug)]
pub struct HlspSolution {
    pub dx: Vec<f64>,
    pub levels: Vec<LevelSolution>,
    pub active: ActiveSetState,
    pub active_rows: Vec<ActiveRow>,
    /// Basis of the variables left free by all levels.
    pub basis: SparseMatrix,
    pub warm: WarmStart,
    pub iterations: usize,
    pub converged: bool,
}

impl HlspSolution {
    pub fn v_star(&self, l: usize) -> &[f64] {
        &self.levels[l].v_star
    }

    /// Stacked rows fixed before level `l`, with their references.
    pub fn active_matrix(&self, data: &HlspData, before: usize) -> (SparseMatrix, Vec<RowRef>) {
        let rows = RowSource::new(data);
        let refs: Vec<RowRef> = self.active_rows.iter().filter(|r| r.level < before).map(|r| r.row).collect();
        (rows.matrix(&refs), refs)
    }

    /// Row weights for the Hessian of level `l`: the level's own slacks on
    /// its constraint rows and least-squares multipliers of the rows fixed
    /// by higher levels. Trust-region and second-order rows get no weight.
    pub fn hessian_weights(
        &self,
        data: &HlspData,
        l: usize,
        precond: Option<&TriangularPrecond>,
        tol: f64,
        max_iter: usize,
    ) -> (Vec<Vec<f64>>, CgResult) {
        let mut out: Vec<Vec<f64>> = data.levels[..=l].iter().map(|lv| vec![0.0; lv.constraint_rows]).collect();
        let v = &self.levels[l].v_star;
        let target: Vec<f64> = data.levels[l].a.tr_mul_vec(v).into_iter().map(|x| -x).collect();
        let (a, refs) = self.active_matrix(data, l);
        let cg = if a.rows() == 0 {
            CgResult {
                x: Vec::new(),
                status: crate::numerics::CgStatus::Converged,
                iterations: 0,
                relative_residual: 0.0,
            }
        } else {
            compute_multipliers(&a, &target, precond, tol, max_iter)
        };
        for (r, &lam) in refs.iter().zip(&cg.x) {
            if r.level != TRUST_LEVEL && r.row < data.levels[r.level].constraint_rows {
                out[r.level][r.row] += lam;
            }
        }
        let own = data.levels[l].constraint_rows;
        out[l][..own].copy_from_slice(&v[..own]);
        (out, cg)
    }
}

/// Row access across levels and the trust-region box.
struct RowSource<'a> {
    data: &'a HlspData,
    at: Vec<SparseMatrix>,
}

impl<'a> RowSource<'a> {
    fn new(data: &'a HlspData) -> Self {
        RowSource { data, at: data.levels.iter().map(|l| l.a.transpose()).collect() }
    }

    fn entries(&self, r: RowRef) -> (Vec<(usize, f64)>, f64) {
        if r.level == TRUST_LEVEL {
            let sign = if r.row % 2 == 0 { 1.0 } else { -1.0 };
            return (vec![(r.row / 2, sign)], self.data.trust_radius);
        }
        let (ri, rv) = self.at[r.level].col(r.row);
        (ri.iter().copied().zip(rv.iter().copied()).collect(), self.data.levels[r.level].b[r.row])
    }

    fn matrix(&self, refs: &[RowRef]) -> SparseMatrix {
        let mut trip = Vec::new();
        for (k, &r) in refs.iter().enumerate() {
            trip.extend(self.entries(r).0.into_iter().map(|(j, v)| (k, j, v)));
        }
        SparseMatrix::from_triplets(refs.len(), self.data.n, &trip)
    }
}

fn selection_matrix(n: usize, kept: &[usize]) -> SparseMatrix {
    let columns: Vec<Vec<(usize, f64)>> = kept.iter().map(|&j| vec![(j, 1.0)]).collect();
    SparseMatrix::from_columns(n, &columns)
}

/// Basis `Z` of the projected new rows, `(rows·N)·Z = 0`. Single-variable
/// rows drop their variable; Euler dynamics rows over a selection of the
/// original variables go through the banded turnback; anything left uses
/// a dense or general basis.
fn nullspace_step(
    rows: &SparseMatrix,
    euler: Option<(&[usize], DynamicsDims)>,
    basis: &SparseMatrix,
    free: &Option<Vec<usize>>,
    s: &AdmmSettings,
) -> Result<(SparseMatrix, Option<Vec<usize>>, NullspaceKind), Error> {
    let n_r = basis.cols();
    if rows.rows() == 0 {
        return Ok((SparseMatrix::identity(n_r), free.clone(), NullspaceKind::Unchanged));
    }
    let proj = rows.mul_sparse(basis);
    let projt = proj.transpose();
    let mut is_euler = vec![false; rows.rows()];
    if let Some((er, _)) = euler {
        for &r in er {
            is_euler[r] = true;
        }
    }
    let mut removed = vec![false; n_r];
    let mut rest = Vec::new();
    for r in 0..rows.rows() {
        if is_euler[r] {
            continue;
        }
        let (ci, cv) = projt.col(r);
        let mx = cv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let nz: Vec<usize> = ci.iter().zip(cv).filter(|(_, v)| v.abs() > SELECTION_TOL * mx).map(|(&j, _)| j).collect();
        match nz.len() {
            0 => {}
            1 => removed[nz[0]] = true,
            _ => rest.push(r),
        }
    }
    let kept: Vec<usize> = (0..n_r).filter(|&j| !removed[j]).collect();
    let mut kind = if kept.len() < n_r { NullspaceKind::Selection } else { NullspaceKind::Unchanged };
    let mut z = selection_matrix(n_r, &kept);
    let mut free_out: Option<Vec<usize>> = free.as_ref().map(|f| kept.iter().map(|&j| f[j]).collect());
    let mut euler_done = false;
    if let (Some((er, dims)), Some(f1)) = (euler, free_out.as_ref()) {
        if dims.n() == rows.cols() {
            let mut in_free = vec![false; rows.cols()];
            for &j in f1 {
                in_free[j] = true;
            }
            let removed_global: Vec<usize> = (0..rows.cols()).filter(|&j| !in_free[j]).collect();
            if let Some(d2) = reduced_dims(&dims, &removed_global) {
                let a_dyn = rows.select_rows(er).select_cols(f1);
                if let Ok(b) = turnback_euler_threaded(&a_dyn, &d2, s.threads) {
                    z = z.mul_sparse(&b.z);
                    euler_done = true;
                    kind = NullspaceKind::Dynamics;
                    free_out = None;
                }
            }
        }
    }
    if !euler_done {
        if let Some((er, _)) = euler {
            rest.extend_from_slice(er);
            rest.sort_unstable();
        }
    }
    if !rest.is_empty() {
        let r_proj = proj.select_rows(&rest).mul_sparse(&z);
        let mx = r_proj.max_abs();
        let r_proj = r_proj.pruned(SELECTION_TOL * mx);
        if r_proj.nnz() > 0 {
            let k = r_proj.cols();
            let z3 = if k <= s.dense_cutoff {
                kind = NullspaceKind::Dense;
                SparseMatrix::from_dense(&dense_nullspace(&r_proj.to_dense(), DENSE_RANK_TOL), 0.0)
            } else {
                kind = NullspaceKind::General;
                turnback_general(&r_proj)?.z
            };
            z = z.mul_sparse(&z3);
            free_out = None;
        }
    }
    Ok((z, free_out, kind))
}

/// Per-row factors bringing the nonzero rows of `a` to unit norm. Rows
/// that vanish up to roundoff keep factor one.
fn unit_row_scales(a: &SparseMatrix) -> Vec<f64> {
    let mut sq = vec![0.0; a.rows()];
    for (r, _, v) in a.triplets() {
        sq[r] += v * v;
    }
    let big = sq.iter().cloned().fold(0.0, f64::max);
    sq.iter().map(|&q| if q > 1e-24 * big && q > 0.0 { 1.0 / math::sqrt(q) } else { 1.0 }).collect()
}

fn scale_rows(a: &SparseMatrix, scale: &[f64], sign: f64) -> SparseMatrix {
    let trip: Vec<(usize, usize, f64)> = a.triplets().map(|(r, c, v)| (r, c, sign * scale[r] * v)).collect();
    SparseMatrix::from_triplets(a.rows(), a.cols(), &trip)
}

/// Solves the linearized hierarchy level by level.
pub fn solve_hlsp(
    data: &HlspData,
    s: &AdmmSettings,
    warm: Option<(&WarmStart, WarmMode)>,
) -> Result<HlspSolution, Error> {
    s.validate()?;
    let n = data.n;
    let rows = RowSource::new(data);
    let mut basis = SparseMatrix::identity(n);
    let mut free: Option<Vec<usize>> = Some((0..n).collect());
    let mut dx = vec![0.0; n];
    // inactive inequality rows with the residual they may keep
    let mut inactive: Vec<(RowRef, f64)> = Vec::new();
    if data.trust_radius.is_finite() {
        for r in 0..2 * n {
            inactive.push((RowRef { level: TRUST_LEVEL, row: r }, 0.0));
        }
    }
    let mut levels = Vec::with_capacity(data.p());
    let mut active = ActiveSetState::default();
    let mut active_rows = Vec::new();
    let mut warm_out = WarmStart::default();
    let mut iterations = 0;
    let mut converged = true;
    for (l, lvl) in data.levels.iter().enumerate() {
        let free_before = basis.cols();
        let proj = lvl.a.mul_sparse(&basis);
        let ax = lvl.a.mul_vec(&dx);
        let b_res: Vec<f64> = lvl.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let e_idx: Vec<usize> = (0..lvl.rows()).filter(|&i| lvl.kinds[i] == Kind::Equality).collect();
        let i_idx: Vec<usize> = (0..lvl.rows()).filter(|&i| lvl.kinds[i] == Kind::Inequality).collect();
        let in_refs: Vec<RowRef> = inactive.iter().map(|(r, _)| *r).collect();
        let in_rows = rows.matrix(&in_refs);
        let in_ax = in_rows.mul_vec(&dx);
        let in_proj = in_rows.mul_sparse(&basis);
        let in_scale = unit_row_scales(&in_proj);
        let p = ProjectedLevel {
            eq: proj.select_rows(&e_idx),
            eq_rhs: e_idx.iter().map(|&i| b_res[i]).collect(),
            own: proj.select_rows(&i_idx).scaled(-1.0),
            own_lo: i_idx.iter().map(|&i| -b_res[i]).collect(),
            inact: scale_rows(&in_proj, &in_scale, -1.0),
            inact_lo: inactive
                .iter()
                .zip(&in_ax)
                .zip(&in_scale)
                .map(|(((r, allow), a), sc)| -sc * (rows.entries(*r).1 + allow - a))
                .collect(),
        };
        let mut state = AdmmLevelState::zero(&p, s.rho0, s.sigma0);
        if let Some((w, mode)) = warm {
            if let Some(prev) = w.levels.get(l) {
                match mode {
                    WarmMode::Fresh => {}
                    WarmMode::StepSizes => state.rho = prev.rho,
                    WarmMode::Resolve => {
                        if prev.fits(&p) {
                            state = prev.clone();
                        } else {
                            state.rho = prev.rho;
                            state.sigma = prev.sigma;
                        }
                    }
                }
            }
        }
        state.iterations = 0;
        let mut report = solve_level(&p, &mut state, s)?;
        if s.polish && report.iterations > 0 {
            report.polished = polish(&p, &mut state, s);
            report.kkt_norm = state.kkt_norm;
            if report.polished && state.kkt_norm < s.eta {
                report.status = LevelStatus::Converged;
            }
        }
        iterations += report.iterations;
        converged &= report.status == LevelStatus::Converged;

        let dz = state.z.clone();
        let step = basis.mul_vec(&dz);
        for (x, d) in dx.iter_mut().zip(&step) {
            *x += d;
        }
        let mut v_star = vec![0.0; lvl.rows()];
        for (k, v) in p.eq_slack(&dz).into_iter().enumerate() {
            v_star[e_idx[k]] = v;
        }
        for (k, &i) in i_idx.iter().enumerate() {
            v_star[i] = -state.v_own[k];
        }
        let own_refs: Vec<RowRef> = i_idx.iter().map(|&i| RowRef { level: l, row: i }).collect();
        let (prom_rec, own_rec) = activation_records(&p, &state, s.nu, &in_refs, &own_refs);

        let mut new_refs: Vec<RowRef> = Vec::new();
        let mut new_active: Vec<(RowRef, Origin)> = Vec::new();
        let mut activated_promoted = Vec::new();
        let mut still_inactive = Vec::new();
        for (k, rec) in prom_rec.iter().enumerate() {
            if rec.active {
                activated_promoted.push(rec.row);
                new_refs.push(rec.row);
                new_active.push((rec.row, Origin::Promoted));
            } else {
                still_inactive.push(inactive[k]);
            }
        }
        let mut activated_own = Vec::new();
        let mut euler_rows = Vec::new();
        let euler_range = lvl.euler.map(|e| e.start..e.start + e.dims.rows());
        for &i in &e_idx {
            if euler_range.as_ref().is_some_and(|r| r.contains(&i)) {
                euler_rows.push(new_refs.len());
            }
            activated_own.push(i);
            new_refs.push(RowRef { level: l, row: i });
            new_active.push((RowRef { level: l, row: i }, Origin::Own));
        }
        for (k, rec) in own_rec.iter().enumerate() {
            let i = i_idx[k];
            if rec.active {
                activated_own.push(i);
                new_refs.push(rec.row);
                new_active.push((rec.row, Origin::Own));
            } else {
                still_inactive.push((rec.row, v_star[i].max(0.0)));
            }
        }
        activated_own.sort_unstable();
        let new_rows = rows.matrix(&new_refs);
        let euler_arg = match (lvl.euler, euler_rows.len()) {
            (Some(e), k) if k == e.dims.rows() => Some((euler_rows.as_slice(), e.dims)),
            _ => None,
        };
        let (z, free_new, kind) = nullspace_step(&new_rows, euler_arg, &basis, &free, s)?;
        basis = basis.mul_sparse(&z);
        free = free_new;
        let nullspace_residual = new_rows.mul_sparse(&basis).max_abs();
        let new_ax = new_rows.mul_vec(&dx);
        for (k, &r) in new_refs.iter().enumerate() {
            active_rows.push(ActiveRow { row: r, origin: new_active[k].1, level: l, target: new_ax[k] });
        }
        inactive = still_inactive;
        active.active.push(new_active);
        active.inactive.push(inactive.iter().map(|(r, _)| *r).collect());

        let mut activations = prom_rec;
        activations.extend(own_rec);
        warm_out.levels.push(state);
        levels.push(LevelSolution {
            level: l,
            dz,
            v_star,
            activated_promoted,
            activated_own,
            free_before,
            free_after: basis.cols(),
            nullspace: kind,
            nullspace_residual,
            report,
            activations,
        });
    }
    Ok(HlspSolution { dx, levels, active, active_rows, basis, warm: warm_out, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::HlspLevel;

    fn level(a: &[&[f64]], b: &[f64], kinds: &[Kind]) -> HlspLevel {
        let d = DenseMatrix::from_rows(a);
        HlspLevel {
            a: SparseMatrix::from_dense(&d, 0.0),
            b: b.to_vec(),
            kinds: kinds.to_vec(),
            constraint_rows: b.len(),
            euler: None,
        }
    }

    fn data(n: usize, levels: Vec<HlspLevel>) -> HlspData {
        HlspData { n, trust_radius: f64::INFINITY, levels }
    }

    proptest::proptest! {
        #[test]
        fn level_system_is_spd(
            seed in 0u64..1000,
            rho in 1e-6f64..1e6,
            sigma in 1e-12f64..1.0,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..12);
            let mut rand_mat = |m: usize| {
                let d = DenseMatrix::from_fn(m, n, |_, _| if rng.gen_bool(0.4) { rng.gen_range(-1.0..1.0) } else { 0.0 });
                SparseMatrix::from_dense(&d, 0.0)
            };
            let (eq, own, inact) = (rand_mat(3), rand_mat(4), rand_mat(5));
            let p = ProjectedLevel {
                eq,
                eq_rhs: vec![0.0; 3],
                own,
                own_lo: vec![0.0; 4],
                inact,
                inact_lo: vec![0.0; 5],
            };
            let f = Grams::new(&p).factor(rho, sigma).unwrap();
            proptest::prop_assert!(f.min_pivot() > 0.0);
        }
    }

    #[test]
    fn single_equality_level() {
        let d = data(2, vec![level(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 2.0], &[Kind::Equality; 2])]);
        let sol = solve_hlsp(&d, &AdmmSettings::default(), None).unwrap();
        assert!((sol.dx[0] - 1.0).abs() < 1e-9 && (sol.dx[1] - 2.0).abs() < 1e-9);
        assert!(sol.v_star(0).iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn lexicographic_protection() {
        let d = data(
            2,
            vec![
                level(&[&[1.0, 0.0]], &[1.0], &[Kind::Equality]),
                level(&[&[1.0, 0.0], &[0.0, 1.0]], &[0.0, 3.0], &[Kind::Equality; 2]),
            ],
        );
        let sol = solve_hlsp(&d, &AdmmSettings::default(), None).unwrap();
        assert!((sol.dx[0] - 1.0).abs() < 1e-9 && (sol.dx[1] - 3.0).abs() < 1e-9);
        assert!((sol.v_star(1)[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_constant_inequality() {
        let d = data(1, vec![level(&[&[0.0]], &[-1.0], &[Kind::Inequality])]);
        let sol = solve_hlsp(&d, &AdmmSettings::default(), None).unwrap();
        assert!((sol.v_star(0)[0] - 1.0).abs() < 1e-9);
        assert_eq!(sol.levels[0].activated_own, vec![0]);
    }

    #[test]
    fn interior_inequalities_stay_at_zero() {
        let p = ProjectedLevel {
            eq: SparseMatrix::zeros(0, 2),
            eq_rhs: vec![],
            own: SparseMatrix::identity(2).scaled(-1.0),
            own_lo: vec![-1.0, -2.0],
            inact: SparseMatrix::zeros(0, 2),
            inact_lo: vec![],
        };
        let s = AdmmSettings::default();
        let mut st = AdmmLevelState::zero(&p, s.rho0, s.sigma0);
        let rep = solve_level(&p, &mut st, &s).unwrap();
        assert_eq!(rep.status, LevelStatus::Converged);
        assert!(st.z.iter().all(|z| z.abs() < 1e-6));
        let (prom, own) = update_active_sets(&p, &st, s.nu);
        assert!(prom.is_empty() && own.iter().all(|a| !a));
    }

    #[test]
    fn trust_box_bounds_step() {
        let mut d = data(2, vec![level(&[&[1.0, 0.0], &[0.0, 1.0]], &[5.0, -0.5], &[Kind::Equality; 2])]);
        d.trust_radius = 1.0;
        let sol = solve_hlsp(&d, &AdmmSettings::default(), None).unwrap();
        assert!(sol.dx.iter().all(|x| x.abs() <= 1.0 + 1e-6));
        assert!((sol.dx[0] - 1.0).abs() < 1e-6 && (sol.dx[1] + 0.5).abs() < 1e-6);
        assert!((sol.v_star(0)[0] + 4.0).abs() < 1e-6);
    }

    #[test]
    fn saturated_promoted_row_activates() {
        let p = ProjectedLevel {
            eq: SparseMatrix::zeros(0, 1),
            eq_rhs: vec![],
            own: SparseMatrix::zeros(0, 1),
            own_lo: vec![],
            inact: SparseMatrix::identity(1).scaled(-1.0),
            inact_lo: vec![0.0],
        };
        let mut st = AdmmLevelState::zero(&p, 1.0, 1e-6);
        st.w_inact = vec![0.0];
        st.u_inact = vec![-0.5];
        let (prom, _) = update_active_sets(&p, &st, 1e-6);
        assert_eq!(prom, vec![true]);
        st.w_inact = vec![5.0];
        st.u_inact = vec![0.0];
        let (prom, _) = update_active_sets(&p, &st, 1e-6);
        assert_eq!(prom, vec![false]);
    }

    #[test]
    fn resolve_takes_zero_iterations() {
        let d = data(
            3,
            vec![
                level(&[&[1.0, 1.0, 0.0]], &[-1.0], &[Kind::Inequality]),
                level(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 1.0], &[1.0, 2.0, 3.0]], &[1.0, 1.0, 0.5], &[Kind::Equality; 3]),
            ],
        );
        let s = AdmmSettings::default();
        let first = solve_hlsp(&d, &s, None).unwrap();
        assert!(first.iterations > 0);
        let again = solve_hlsp(&d, &s, Some((&first.warm, WarmMode::Resolve))).unwrap();
        assert_eq!(again.iterations, 0);
        assert_eq!(again.dx, first.dx);
    }

    #[test]
    fn multipliers_examples() {
        let a = SparseMatrix::from_dense(&DenseMatrix::from_rows(&[&[2.0, 0.0]]), 0.0);
        let r = compute_multipliers(&a, &[3.0, 0.0], None, 1e-12, 10);
        assert!((r.x[0] - 1.5).abs() < 1e-12);
        let r = compute_multipliers(&a, &[0.0, 0.0], None, 1e-12, 10);
        assert_eq!(r.x, vec![0.0]);
        let dup = SparseMatrix::from_dense(&DenseMatrix::from_rows(&[&[1.0, 0.0], &[1.0, 0.0]]), 0.0);
        let r = compute_multipliers(&dup, &[2.0, 0.0], None, 1e-12, 10);
        assert!((r.x[0] - 1.0).abs() < 1e-10 && (r.x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn settings_validation() {
        let mut s = AdmmSettings::default();
        assert!(s.validate().is_ok());
        s.alpha = 2.0;
        assert!(s.validate().is_err());
    }
}
