//! Sequential outer loop: one step filter per level with a trust region,
//! Newton or Gauss-Newton linearization per level, and an adaptive
//! threshold deciding between the two.

use alloc::vec;
use alloc::vec::Vec;

use crate::admm::{solve_hlsp, AdmmSettings, HlspSolution, WarmMode, WarmStart};
use crate::hierarchy::{Hierarchy, HlspData, SoiLevel, SoiState};
use crate::numerics::dense::norm2;
use crate::Error;

#[derive(Clone, Debug, PartialEq)]
pub struct ShlspSettings {
    /// Step-norm convergence threshold.
    pub chi: f64,
    /// Filter acceptance constants, `0 < γ < β < 1`.
    pub beta: f64,
    pub gamma: f64,
    /// Violations of higher levels below this count as zero, so that
    /// solver noise cannot pass for progress in `h`.
    pub h_floor: f64,
    /// Upper bound on `h` for accepted steps, relative to
    /// `max(1, h)` at the start of the level.
    pub h_max: f64,
    /// A budget exit returns the accepted iterate of the unfinished level
    /// with the least `‖f⁺‖²` among those with `h` at most this value, or
    /// the one with the least `h` if there is none.
    pub h_best: f64,
    /// Threshold growth factor, `κ > 1`.
    pub kappa: f64,
    /// Required relative decrease for a new filter front, `0 < δ ≤ 1`.
    pub delta: f64,
    /// Steps needed since the last new front before the threshold shrinks.
    pub zeta: usize,
    pub eps_low: f64,
    pub eps_high: f64,
    pub eps_init: f64,
    pub tr_init: f64,
    pub tr_grow: f64,
    pub tr_shrink: f64,
    pub tr_min: f64,
    pub tr_max: f64,
    /// Outer iterations over all levels.
    pub max_outer: usize,
    /// Allows Newton steps; `false` forces Gauss-Newton everywhere.
    pub soi: bool,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub admm: AdmmSettings,
}

impl Default for ShlspSettings {
    fn default() -> Self {
        ShlspSettings {
            chi: 1e-6,
            beta: 0.99,
            gamma: 1e-4,
            h_floor: 1e-6,
            h_max: 1.0,
            h_best: 1e-4,
            kappa: 2.0,
            delta: 0.95,
            zeta: 1,
            eps_low: 1e-12,
            eps_high: 1e2,
            eps_init: 1e-12,
            tr_init: 1.0,
            tr_grow: 2.0,
            tr_shrink: 0.5,
            tr_min: 1e-10,
            tr_max: 1e4,
            max_outer: 500,
            soi: true,
            cg_tol: 1e-10,
            cg_max_iter: 1000,
            admm: AdmmSettings::default(),
        }
    }
}

impl ShlspSettings {
    pub fn validate(&self) -> Result<(), Error> {
        if !(0.0 < self.gamma && self.gamma < self.beta && self.beta < 1.0) {
            return Err(Error::InvalidSettings("filter constants must satisfy 0 < gamma < beta < 1"));
        }
        if !(self.kappa > 1.0) {
            return Err(Error::InvalidSettings("kappa must exceed 1"));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidSettings("delta must lie in (0, 1]"));
        }
        if !(self.eps_low > 0.0 && self.eps_low <= self.eps_init && self.eps_init <= self.eps_high) {
            return Err(Error::InvalidSettings("eps_init must lie in [eps_low, eps_high]"));
        }
        if !(self.h_floor >= 0.0 && self.h_max > 0.0 && self.h_best >= 0.0) {
            return Err(Error::InvalidSettings("h_floor and h_best must be nonnegative and h_max positive"));
        }
        if !(self.chi > 0.0) {
            return Err(Error::InvalidSettings("chi must be positive"));
        }
        if !(0.0 < self.tr_min && self.tr_min <= self.tr_init && self.tr_init <= self.tr_max) {
            return Err(Error::InvalidSettings("tr_init must lie in [tr_min, tr_max]"));
        }
        if !(self.tr_grow >= 1.0 && self.tr_shrink > 0.0 && self.tr_shrink < 1.0) {
            return Err(Error::InvalidSettings("trust-region factors must satisfy grow >= 1 > shrink > 0"));
        }
        if !(self.cg_tol > 0.0) {
            return Err(Error::InvalidSettings("cg_tol must be positive"));
        }
        self.admm.validate()
    }
}

/// Filter bookkeeping of one level.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    /// Pairs `(h, ‖f⁺‖²)`.
    pub entries: Vec<(f64, f64)>,
    pub front: (f64, f64),
    pub c: usize,
    pub eps: f64,
}

impl FilterState {
    pub fn new(eps: f64) -> Self {
        FilterState { entries: Vec::new(), front: (f64::INFINITY, f64::INFINITY), c: 0, eps }
    }
}

/// `true` if `candidate` makes enough progress against every filter pair:
/// `h ≤ β·hʲ` or `‖f⁺‖² + γ·h ≤ ‖f⁺ʲ‖²`. A pair with `hʲ = 0` admits no
/// progress in `h`.
pub fn filter_accept(candidate: (f64, f64), filter: &[(f64, f64)], beta: f64, gamma: f64) -> bool {
    let (h, f2) = candidate;
    if !(h.is_finite() && f2.is_finite()) {
        return false;
    }
    filter.iter().all(|&(hj, fj)| (hj > 0.0 && h <= beta * hj) || f2 + gamma * h <= fj)
}

/// Threshold update after one outer step.
pub fn adapt_eps(state: &mut FilterState, candidate: (f64, f64), accepted: bool, s: &ShlspSettings) {
    let (h, f2) = candidate;
    if accepted {
        if h <= state.front.0 && f2 < s.delta * state.front.1 {
            state.eps = (state.eps * s.kappa).min(s.eps_high);
            state.front = (h, f2);
            state.c = 0;
        }
    } else if state.c > s.zeta {
        state.eps = (state.eps / s.kappa).max(s.eps_low);
    }
    state.c += 1;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SoiMode {
    Newton,
    GaussNewton,
}

/// Newton iff the linear slack measure reaches the threshold. The driver
/// passes `‖v̂‖₂²`, the same units as the filter's `‖f⁺‖²`.
pub fn soi_switch(slack: f64, eps: f64) -> SoiMode {
    if slack >= eps {
        SoiMode::Newton
    } else {
        SoiMode::GaussNewton
    }
}

pub fn trust_region_update(accepted: bool, radius: f64, s: &ShlspSettings) -> f64 {
    if accepted {
        (radius * s.tr_grow).min(s.tr_max)
    } else {
        (radius * s.tr_shrink).max(s.tr_min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OuterRecord {
    pub level: usize,
    /// Global outer iteration, starting at 1.
    pub iteration: usize,
    pub accepted: bool,
    /// Candidate `(h, ‖f⁺‖²)`; infinite when the candidate could not be
    /// evaluated.
    pub h: f64,
    pub f2: f64,
    pub eps: f64,
    /// Radius used for the step.
    pub trust_radius: f64,
    pub step_norm: f64,
    pub hlsp_iterations: usize,
    pub hlsp_converged: bool,
    /// Levels linearized with second-order rows.
    pub newton_levels: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelSummary {
    pub level: usize,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// `‖f⁺_l(x*)‖₂` at the end of the level's filter.
    pub slack_norm: f64,
    pub eps: f64,
    /// False if the budget ran out before the level converged.
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShlspStatus {
    Converged,
    /// The outer budget ran out; `x` is the best iterate of the unfinished
    /// level.
    BudgetExceeded,
}

#[derive(Clone, Debug)]
pub struct ShlspResult {
    pub x: Vec<f64>,
    /// `f⁺_l` at the end of each level's filter.
    pub v_star: Vec<Vec<f64>>,
    pub levels: Vec<LevelSummary>,
    pub trace: Vec<OuterRecord>,
    pub filters: Vec<FilterState>,
    pub status: ShlspStatus,
    pub outer_iterations: usize,
}

fn norm2_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Order of iterates for a budget exit: `h` within `tol` first, then the
/// least `‖f⁺‖²`; otherwise the least `h`.
fn better(a: (f64, f64), b: (f64, f64), tol: f64) -> bool {
    match (a.0 <= tol, b.0 <= tol) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => a.1 < b.1,
        (false, false) => a.0 < b.0,
    }
}

fn measure(h: &Hierarchy, x: &[f64], l: usize, v_star: &[Vec<f64>], floor: f64) -> Result<(f64, f64), Error> {
    let viol = h.h_measure(x, l, v_star)?;
    Ok((if viol < floor { 0.0 } else { viol }, norm2_sq(&h.f_plus(x, l)?)))
}

struct Previous {
    data: HlspData,
    sol: HlspSolution,
}

fn soi_state(
    h: &Hierarchy,
    x: &[f64],
    l: usize,
    prev: Option<&Previous>,
    filters: &[FilterState],
    s: &ShlspSettings,
) -> (SoiState, Vec<usize>) {
    let mut soi = SoiState::off(h.p());
    let mut newton = Vec::new();
    let Some(prev) = prev else {
        return (soi, newton);
    };
    if !s.soi {
        return (soi, newton);
    }
    for k in 0..=l.min(prev.data.p().saturating_sub(1)) {
        if k >= prev.data.p() {
            break;
        }
        let rows = prev.data.levels[k].constraint_rows;
        let v_hat = norm2(&prev.sol.v_star(k)[..rows]);
        if soi_switch(v_hat * v_hat, filters[k].eps) == SoiMode::Newton {
            let (weights, _) = prev.sol.hessian_weights(&prev.data, k, None, s.cg_tol, s.cg_max_iter);
            let (r, status) = h.hierarchical_hessian_factor(x, k, &weights);
            soi.levels[k] = SoiLevel { active: true, factor: Some(r), status: Some(status) };
            newton.push(k);
        }
    }
    (soi, newton)
}

pub fn solve(h: &Hierarchy, x0: &[f64], s: &ShlspSettings) -> Result<ShlspResult, Error> {
    solve_observed(h, x0, s, &mut |_| {})
}

/// As [`solve`], calling `observer` after every outer iteration.
pub fn solve_observed(
    h: &Hierarchy,
    x0: &[f64],
    s: &ShlspSettings,
    observer: &mut dyn FnMut(&OuterRecord),
) -> Result<ShlspResult, Error> {
    s.validate()?;
    h.validate()?;
    if x0.len() != h.n() {
        return Err(Error::DimensionMismatch { expected: h.n(), found: x0.len() });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteEvaluation { level: 0 });
    }
    let p = h.p();
    let mut x = x0.to_vec();
    let mut v_star: Vec<Vec<f64>> = Vec::with_capacity(p);
    // unsolved levels are measured against zero slack
    let mut targets: Vec<Vec<f64>> = h.levels().iter().map(|lv| vec![0.0; lv.dim()]).collect();
    let mut filters: Vec<FilterState> = (0..p).map(|_| FilterState::new(s.eps_init)).collect();
    let mut levels = Vec::with_capacity(p);
    let mut trace = Vec::new();
    let mut prev: Option<Previous> = None;
    let mut warm: Option<WarmStart> = None;
    let mut outer = 0;
    let mut status = ShlspStatus::Converged;
    'levels: for l in 0..p {
        let mut radius = s.tr_init;
        for i in 0..p {
            filters[i].front = measure(h, &x, i, &targets, s.h_floor)?;
        }
        filters[l].entries.clear();
        let h_cap = s.h_max * filters[l].front.0.max(1.0);
        let mut best = (x.clone(), measure(h, &x, l, &targets, s.h_floor)?);
        let (mut outer_l, mut inner_l) = (0, 0);
        let mut converged = false;
        loop {
            if outer >= s.max_outer {
                status = ShlspStatus::BudgetExceeded;
                break;
            }
            outer += 1;
            outer_l += 1;
            let (soi, newton_levels) = soi_state(h, &x, l, prev.as_ref(), &filters, s);
            let data = h.linearize(&x, &soi, radius, l + 1)?;
            let sol = solve_hlsp(&data, &s.admm, warm.as_ref().map(|w| (w, WarmMode::StepSizes)))?;
            inner_l += sol.iterations;
            let step_norm = norm2(&sol.dx);
            let current = measure(h, &x, l, &targets, s.h_floor)?;
            let x_new: Vec<f64> = x.iter().zip(&sol.dx).map(|(a, b)| a + b).collect();
            let candidate = measure(h, &x_new, l, &targets, s.h_floor).ok();
            let accepted = sol.converged
                && candidate.is_some_and(|c| {
                    c.0 <= h_cap
                        && filter_accept(c, &filters[l].entries, s.beta, s.gamma)
                        && filter_accept(c, &[current], s.beta, s.gamma)
                });
            for i in 0..p {
                let ci = if i == l { candidate } else { measure(h, &x_new, i, &targets, s.h_floor).ok() };
                adapt_eps(&mut filters[i], ci.unwrap_or((f64::INFINITY, f64::INFINITY)), accepted, s);
            }
            let (ch, cf) = candidate.unwrap_or((f64::INFINITY, f64::INFINITY));
            if accepted {
                if ch >= current.0 {
                    filters[l].entries.push((ch, cf));
                }
                x = x_new;
                if better((ch, cf), best.1, s.h_best) {
                    best = (x.clone(), (ch, cf));
                }
            }
            let record = OuterRecord {
                level: l,
                iteration: outer,
                accepted,
                h: ch,
                f2: cf,
                eps: filters[l].eps,
                trust_radius: radius,
                step_norm,
                hlsp_iterations: sol.iterations,
                hlsp_converged: sol.converged,
                newton_levels,
            };
            observer(&record);
            trace.push(record);
            radius = trust_region_update(accepted, radius, s);
            warm = Some(sol.warm.clone());
            prev = Some(Previous { data, sol });
            if step_norm < s.chi {
                converged = true;
                break;
            }
        }
        if status == ShlspStatus::BudgetExceeded {
            x = best.0;
        }
        v_star.push(h.f_plus(&x, l)?);
        targets[l] = v_star[l].clone();
        levels.push(LevelSummary {
            level: l,
            outer_iterations: outer_l,
            inner_iterations: inner_l,
            slack_norm: norm2(&v_star[l]),
            eps: filters[l].eps,
            converged,
        });
        if status == ShlspStatus::BudgetExceeded {
            for k in (l + 1)..p {
                v_star.push(h.f_plus(&x, k)?);
                levels.push(LevelSummary {
                    level: k,
                    outer_iterations: 0,
                    inner_iterations: 0,
                    slack_norm: norm2(&v_star[k]),
                    eps: filters[k].eps,
                    converged: false,
                });
            }
            break 'levels;
        }
    }
    Ok(ShlspResult { x, v_star, levels, trace, filters, status, outer_iterations: outer })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{ConstraintBlock, Kind};
    use crate::numerics::SparseMatrix;
    use alloc::boxed::Box;

    #[test]
    fn filter_examples() {
        assert!(filter_accept((5.0, 5.0), &[], 0.99, 1e-4));
        assert!(!filter_accept((2.0, 11.0), &[(1.0, 10.0)], 0.99, 1e-4));
        assert!(filter_accept((0.5, 100.0), &[(1.0, 10.0)], 0.9, 1e-4));
    }

    #[test]
    fn adapt_eps_examples() {
        let s = ShlspSettings::default();
        let mut st = FilterState::new(1.0);
        st.front = (1.0, 1.0);
        st.c = 3;
        adapt_eps(&mut st, (0.5, 0.5), true, &s);
        assert_eq!((st.eps, st.c, st.front), (2.0, 1, (0.5, 0.5)));

        let mut st = FilterState::new(1.0);
        adapt_eps(&mut st, (1.0, 1.0), false, &s);
        assert_eq!((st.eps, st.c), (1.0, 1));

        let mut st = FilterState::new(s.eps_high);
        st.front = (1.0, 1.0);
        adapt_eps(&mut st, (0.0, 0.0), true, &s);
        assert_eq!(st.eps, s.eps_high);

        let mut st = FilterState::new(1.0);
        st.c = 2;
        adapt_eps(&mut st, (1.0, 1.0), false, &s);
        assert_eq!((st.eps, st.c), (0.5, 3));
    }

    #[test]
    fn soi_switch_examples() {
        assert_eq!(soi_switch(1.0, 1e-12), SoiMode::Newton);
        assert_eq!(soi_switch(0.0, 1e-12), SoiMode::GaussNewton);
        assert_eq!(soi_switch(1e-3, 1e-3), SoiMode::Newton);
    }

    #[test]
    fn trust_region_examples() {
        let mut s = ShlspSettings::default();
        assert_eq!(trust_region_update(true, 1.0, &s), 2.0);
        assert_eq!(trust_region_update(false, 1.0, &s), 0.5);
        s.tr_min = 0.25;
        assert_eq!(trust_region_update(false, 0.25, &s), 0.25);
    }

    struct Linear {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    }

    impl ConstraintBlock for Linear {
        fn dim(&self) -> usize {
            self.b.len()
        }
        fn kind(&self) -> Kind {
            Kind::Equality
        }
        fn eval(&self, x: &[f64]) -> Vec<f64> {
            self.a.iter().zip(&self.b).map(|(r, b)| r.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() - b).collect()
        }
        fn jacobian(&self, _x: &[f64]) -> SparseMatrix {
            let rows: Vec<&[f64]> = self.a.iter().map(|r| r.as_slice()).collect();
            SparseMatrix::from_dense(&crate::numerics::DenseMatrix::from_rows(&rows), 0.0)
        }
        fn hessian(&self, _x: &[f64], _l: &[f64]) -> Option<SparseMatrix> {
            Some(SparseMatrix::zeros(self.a[0].len(), self.a[0].len()))
        }
        fn variables(&self) -> Vec<usize> {
            (0..self.a[0].len()).collect()
        }
    }

    #[test]
    fn linear_least_squares_converges_quickly() {
        let mut h = Hierarchy::new(2);
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        h.push_level("ls", vec![Box::new(Linear { a, b: vec![1.0, 1.0, 0.0] })]);
        let s = ShlspSettings { tr_init: 10.0, ..ShlspSettings::default() };
        let r = solve(&h, &[0.0, 0.0], &s).unwrap();
        assert!(r.levels[0].outer_iterations <= 3);
        assert!((r.x[0] - 1.0 / 3.0).abs() < 1e-6 && (r.x[1] - 1.0 / 3.0).abs() < 1e-6);
    }
}
