//! Problem runners and result emitters.

use std::fmt::Write as _;
use std::time::Instant;

use clap::ValueEnum;
use serde::Serialize;

use lexls_core::admm::solve_hlsp;
use lexls_core::numerics::dense::norm2;
use lexls_core::problems::{
    assemble_dynamics_jacobian, build_cartpole_hierarchy, build_test_hierarchy, random_dynamics_instance, random_hlsp,
};
use lexls_core::shlsp::{solve_observed, OuterRecord, ShlspResult, ShlspStatus};
use lexls_core::turnback::{turnback_euler_threaded, DynamicsDims, Integrator};
use lexls_core::Error;

use crate::config::Settings;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Problem {
    Testfuncs,
    Cartpole,
    TurnbackBench,
    RandomHlsp,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::Testfuncs => "testfuncs",
            Problem::Cartpole => "cartpole",
            Problem::TurnbackBench => "turnback-bench",
            Problem::RandomHlsp => "random-hlsp",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub problem: Problem,
    pub settings: Settings,
    pub seed: u64,
    pub threads: usize,
    /// Record wall-clock times; without it the time column stays empty so
    /// that equal seeds give identical files.
    pub timing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelRow {
    /// Priority, starting at 1 for the most important level.
    pub level: usize,
    pub name: String,
    pub slack_norm: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub converged: bool,
    pub eps: Option<f64>,
    pub time_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub horizon: usize,
    pub n_ua: usize,
    pub rank: usize,
    pub nnz_z: usize,
    pub nnz_ztz: usize,
    /// `nnz(ZᵀZ)` over the number of entries of `ZᵀZ`.
    pub density: f64,
    pub max_window: usize,
    pub time_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    /// Priority, starting at 1.
    pub level: usize,
    pub iteration: usize,
    pub accepted: bool,
    pub h: f64,
    pub f2: f64,
    pub eps: f64,
    pub trust_radius: f64,
    pub step_norm: f64,
    pub hlsp_iterations: usize,
    pub hlsp_converged: bool,
    pub newton_levels: Vec<usize>,
    pub time_ms: Option<f64>,
}

impl TraceRow {
    fn new(r: &OuterRecord, time_ms: Option<f64>) -> Self {
        TraceRow {
            level: r.level + 1,
            iteration: r.iteration,
            accepted: r.accepted,
            h: r.h,
            f2: r.f2,
            eps: r.eps,
            trust_radius: r.trust_radius,
            step_norm: r.step_norm,
            hlsp_iterations: r.hlsp_iterations,
            hlsp_converged: r.hlsp_converged,
            newton_levels: r.newton_levels.iter().map(|l| l + 1).collect(),
            time_ms,
        }
    }
}

/// Sub-solver record of one level of a single HLSP solve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmmLevelTrace {
    pub level: usize,
    pub iterations: usize,
    pub kkt_norm: f64,
    pub rho_history: Vec<f64>,
    pub resets: usize,
    pub polished: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CartPoleMetrics {
    pub task_error: f64,
    pub zero_control_task_error: f64,
    pub dynamics_residual: f64,
    pub bound_violation: f64,
    pub virtual_control: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub problem: &'static str,
    pub seed: u64,
    pub converged: bool,
    pub status: String,
    pub outer_iterations: usize,
    pub levels: Vec<LevelRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub bench: Vec<BenchRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub admm: Vec<AdmmLevelTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cartpole: Option<CartPoleMetrics>,
    pub x: Vec<f64>,
}

fn time_cell(t: Option<f64>) -> String {
    t.map(|v| v.to_string()).unwrap_or_default()
}

/// Milliseconds rounded to microseconds, so that CSV and JSON carry the
/// same value.
fn millis(d: std::time::Duration) -> f64 {
    (d.as_secs_f64() * 1e6).round() / 1e3
}

impl RunReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.bench.is_empty() {
            out.push_str("problem,level,slack_norm,outer_iters,inner_iters,time_ms\n");
            for r in &self.levels {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    self.problem,
                    r.level,
                    r.slack_norm,
                    r.outer_iters,
                    r.inner_iters,
                    time_cell(r.time_ms)
                );
            }
        } else {
            out.push_str("problem,horizon,n_ua,rank,nnz_z,nnz_ztz,density,max_window,time_ms\n");
            for r in &self.bench {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    self.problem,
                    r.horizon,
                    r.n_ua,
                    r.rank,
                    r.nnz_z,
                    r.nnz_ztz,
                    r.density,
                    r.max_window,
                    time_cell(r.time_ms)
                );
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Runs the outer loop, charging wall time to the level of each outer
/// iteration.
fn solve_timed(
    h: &lexls_core::hierarchy::Hierarchy,
    x0: &[f64],
    opts: &RunOptions,
) -> Result<(ShlspResult, Vec<f64>, Vec<f64>), Error> {
    let mut solver = opts.settings.solver.clone();
    solver.admm.threads = opts.threads;
    let mut times = vec![0.0; h.p()];
    let mut steps = Vec::new();
    let mut last = Instant::now();
    let res = solve_observed(h, x0, &solver, &mut |r: &OuterRecord| {
        let now = Instant::now();
        let t = millis(now - last);
        times[r.level] += t;
        steps.push(t);
        last = now;
    })?;
    Ok((res, times, steps))
}

fn trace_rows(res: &ShlspResult, steps: &[f64], timing: bool) -> Vec<TraceRow> {
    res.trace.iter().zip(steps).map(|(r, &t)| TraceRow::new(r, timing.then_some(t))).collect()
}

fn level_rows(h: &lexls_core::hierarchy::Hierarchy, res: &ShlspResult, times: &[f64], timing: bool) -> Vec<LevelRow> {
    res.levels
        .iter()
        .map(|l| LevelRow {
            level: l.level + 1,
            name: h.levels()[l.level].name.to_string(),
            slack_norm: l.slack_norm,
            outer_iters: l.outer_iterations,
            inner_iters: l.inner_iterations,
            converged: l.converged,
            eps: Some(l.eps),
            time_ms: timing.then(|| (times[l.level] * 1e3).round() / 1e3),
        })
        .collect()
}

fn status_name(s: ShlspStatus) -> String {
    match s {
        ShlspStatus::Converged => "converged".into(),
        ShlspStatus::BudgetExceeded => "budget_exceeded".into(),
    }
}

fn run_testfuncs(opts: &RunOptions) -> Result<RunReport, Error> {
    let spec = &opts.settings.testfuncs;
    let h = build_test_hierarchy(spec);
    let (res, times, steps) = solve_timed(&h, &spec.x0, opts)?;
    Ok(RunReport {
        problem: opts.problem.name(),
        seed: opts.seed,
        converged: res.status == ShlspStatus::Converged && res.levels.iter().all(|l| l.converged),
        status: status_name(res.status),
        outer_iterations: res.outer_iterations,
        levels: level_rows(&h, &res, &times, opts.timing),
        bench: Vec::new(),
        trace: trace_rows(&res, &steps, opts.timing),
        admm: Vec::new(),
        cartpole: None,
        x: res.x,
    })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn run_cartpole(opts: &RunOptions) -> Result<RunReport, Error> {
    let pb = build_cartpole_hierarchy(&opts.settings.cartpole);
    let x0 = pb.initial_guess();
    let (res, times, steps) = solve_timed(&pb.hierarchy, &x0, opts)?;
    let metrics = CartPoleMetrics {
        task_error: pb.task_error(&res.x),
        zero_control_task_error: pb.task_error(&pb.rollout(&[])),
        dynamics_residual: max_abs(&pb.hierarchy.evaluate_level(1, &res.x)?),
        bound_violation: max_abs(&pb.hierarchy.f_plus(&res.x, 0)?),
        virtual_control: pb.virtual_columns.iter().fold(0.0, |m, &c| m.max(res.x[c].abs())),
    };
    Ok(RunReport {
        problem: opts.problem.name(),
        seed: opts.seed,
        converged: res.status == ShlspStatus::Converged && res.levels.iter().all(|l| l.converged),
        status: status_name(res.status),
        outer_iterations: res.outer_iterations,
        levels: level_rows(&pb.hierarchy, &res, &times, opts.timing),
        bench: Vec::new(),
        trace: trace_rows(&res, &steps, opts.timing),
        admm: Vec::new(),
        cartpole: Some(metrics),
        x: res.x,
    })
}

fn run_random_hlsp(opts: &RunOptions) -> Result<RunReport, Error> {
    let data = random_hlsp(&opts.settings.random, opts.seed);
    let mut admm = opts.settings.solver.admm.clone();
    admm.threads = opts.threads;
    let start = Instant::now();
    let sol = solve_hlsp(&data, &admm, None)?;
    let elapsed = millis(start.elapsed());
    let levels = sol
        .levels
        .iter()
        .map(|l| LevelRow {
            level: l.level + 1,
            name: format!("random {}", l.level + 1),
            slack_norm: norm2(&l.v_star),
            outer_iters: 0,
            inner_iters: l.report.iterations,
            converged: l.report.status == lexls_core::admm::LevelStatus::Converged,
            eps: None,
            time_ms: opts.timing.then_some(((elapsed / sol.levels.len() as f64) * 1e3).round() / 1e3),
        })
        .collect();
    Ok(RunReport {
        problem: opts.problem.name(),
        seed: opts.seed,
        converged: sol.converged,
        status: if sol.converged { "converged".into() } else { "not_converged".into() },
        outer_iterations: 0,
        levels,
        bench: Vec::new(),
        trace: Vec::new(),
        admm: sol
            .levels
            .iter()
            .map(|l| AdmmLevelTrace {
                level: l.level + 1,
                iterations: l.report.iterations,
                kkt_norm: l.report.kkt_norm,
                rho_history: l.report.rho_history.clone(),
                resets: l.report.resets,
                polished: l.report.polished,
            })
            .collect(),
        cartpole: None,
        x: sol.dx,
    })
}

/// Nullspace basis of a seeded random dynamics Jacobian and the sparsity
/// of its Gram matrix.
pub fn bench_point(dims: &DynamicsDims, seed: u64, threads: usize, timing: bool) -> Result<BenchRow, Error> {
    let blocks = random_dynamics_instance(dims, seed);
    let a = assemble_dynamics_jacobian(&blocks, dims)?;
    let start = Instant::now();
    let z = turnback_euler_threaded(&a, dims, threads)?;
    let elapsed = millis(start.elapsed());
    let ztz = z.z.transpose().mul_sparse(&z.z);
    let r = z.rank();
    Ok(BenchRow {
        horizon: dims.horizon,
        n_ua: dims.n_ua,
        rank: r,
        nnz_z: z.z.nnz(),
        nnz_ztz: ztz.nnz(),
        density: if r == 0 { 0.0 } else { ztz.nnz() as f64 / (r * r) as f64 },
        max_window: z.max_support_width(),
        time_ms: timing.then_some(elapsed),
    })
}

fn run_turnback_bench(opts: &RunOptions) -> Result<RunReport, Error> {
    let b = &opts.settings.bench;
    let mut rows = Vec::new();
    for &n_ua in &b.n_ua {
        for &t in &b.horizons {
            let dims = DynamicsDims {
                horizon: t,
                n_q: b.n_q,
                n_qdot: b.n_q,
                n_tau: b.n_q - n_ua,
                n_gamma: b.n_gamma,
                n_ua,
                integrator: Integrator::Explicit,
            };
            rows.push(bench_point(&dims, opts.seed, opts.threads, opts.timing)?);
        }
    }
    Ok(RunReport {
        problem: opts.problem.name(),
        seed: opts.seed,
        converged: true,
        status: "converged".into(),
        outer_iterations: 0,
        levels: Vec::new(),
        bench: rows,
        trace: Vec::new(),
        admm: Vec::new(),
        cartpole: None,
        x: Vec::new(),
    })
}

pub fn run(opts: &RunOptions) -> Result<RunReport, Error> {
    match opts.problem {
        Problem::Testfuncs => run_testfuncs(opts),
        Problem::Cartpole => run_cartpole(opts),
        Problem::RandomHlsp => run_random_hlsp(opts),
        Problem::TurnbackBench => run_turnback_bench(opts),
    }
}
