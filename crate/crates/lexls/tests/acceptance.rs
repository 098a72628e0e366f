//! Acceptance criteria 1 to 9. Prints one line per criterion and exits
//! with a failure status if any of them fails.

#![allow(clippy::needless_range_loop)]

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use lexls::{run, Problem, RunOptions, Settings};
use lexls_core::admm::{solve_hlsp, AdmmSettings, WarmMode};
use lexls_core::problems::{
    assemble_dynamics_jacobian, build_test_hierarchy, mccormick_local_minima, mccormick_offset_check,
    random_dynamics_instance, random_hlsp, RandomHlspSpec, TestHierarchySpec,
};
use lexls_core::shlsp::{solve, ShlspResult, ShlspSettings};
use lexls_core::turnback::{bandwidth, basis_residual, turnback_euler, DynamicsDims, Integrator};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn testfuncs(eps_init: f64, max_outer: usize) -> (ShlspResult, Duration) {
    let spec = TestHierarchySpec::default();
    let h = build_test_hierarchy(&spec);
    let s = ShlspSettings { eps_init, max_outer, ..ShlspSettings::default() };
    let start = Instant::now();
    let res = solve(&h, &spec.x0, &s).expect("test hierarchy solves");
    (res, start.elapsed())
}

fn criterion_1() -> Outcome {
    let (res, t) = testfuncs(1e-12, ShlspSettings::default().max_outer);
    let l: Vec<f64> = res.levels.iter().map(|s| s.slack_norm).collect();
    let ok = l.len() == 9
        && l[0] <= 1e-3
        && (0.0..=1e-2).contains(&l[1])
        && (l[2] - 1.0).abs() <= 5e-2
        && l[3] <= 1e-3
        && (l[4] - 1.0).abs() <= 1e-3
        && l[5] <= 1e-3
        && l[6] <= 1e-2
        && (l[7] - 18.1).abs() <= 0.2
        && l[8].is_finite()
        && t < Duration::from_secs(30);
    let shown: Vec<String> = l.iter().map(|v| format!("{v:.4e}")).collect();
    check(ok, format!("slacks [{}] in {:.2} s", shown.join(", "), secs(t)))
}

fn criterion_2() -> Outcome {
    let offset_ok = mccormick_offset_check(20.0, 0.05).unwrap_or(false);
    let (res, _) = testfuncs(1e-12, ShlspSettings::default().max_outer);
    let (a, b) = (res.x[8], res.x[9]);
    let dist = mccormick_local_minima(0.05)
        .into_iter()
        .map(|(p, q)| ((p - a).powi(2) + (q - b).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min);
    check(
        offset_ok && dist <= 0.05,
        format!("offset check {offset_ok}, (x9, x10) = ({a:.4}, {b:.4}) at {dist:.4} from a grid minimum"),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for i in 0..20usize {
        let n_ua = [0, 1, 6][i % 3];
        let n_q = 7 + (i * 5) % 16;
        let d = DynamicsDims {
            horizon: 5 + (i * 7) % 21,
            n_q,
            n_qdot: n_q,
            n_tau: n_q - n_ua,
            n_gamma: (i * 11) % 25,
            n_ua,
            integrator: if i % 2 == 0 { Integrator::Explicit } else { Integrator::Implicit },
        };
        let a = assemble_dynamics_jacobian(&random_dynamics_instance(&d, i as u64), &d).expect("layout");
        let z = match turnback_euler(&a, &d) {
            Ok(z) => z,
            Err(e) => {
                failures.push(format!("instance {i}: {e}"));
                continue;
            }
        };
        let res = basis_residual(&a, &z.z);
        let tol = 1e-8 * (1.0 + a.norm_inf());
        worst = worst.max(res / tol);
        if res > tol {
            failures.push(format!("instance {i}: residual {res:e}"));
        }
        if z.rank() != d.horizon * (d.n_tau + d.n_gamma) {
            failures.push(format!("instance {i}: rank {}", z.rank()));
        }
        if z.max_support_width() > bandwidth(&d).expect("valid dims") {
            failures.push(format!("instance {i}: support {}", z.max_support_width()));
        }
    }
    let t = start.elapsed();
    if t >= Duration::from_secs(60) {
        failures.push(format!("runtime {:.1} s", secs(t)));
    }
    check(
        failures.is_empty(),
        format!(
            "20 instances, worst residual/tolerance {worst:.2e}, {:.2} s{}",
            secs(t),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for n_ua in [0usize, 1] {
        let nnz: Vec<f64> = [5usize, 10, 15, 20, 25]
            .iter()
            .map(|&t| {
                let d = DynamicsDims {
                    horizon: t,
                    n_q: 22,
                    n_qdot: 22,
                    n_tau: 22 - n_ua,
                    n_gamma: 24,
                    n_ua,
                    integrator: Integrator::Explicit,
                };
                let a = assemble_dynamics_jacobian(&random_dynamics_instance(&d, 1), &d).expect("layout");
                turnback_euler(&a, &d).map(|z| z.z.nnz() as f64).unwrap_or(f64::NAN)
            })
            .collect();
        let inc: Vec<f64> = nnz.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = inc.iter().sum::<f64>() / inc.len() as f64;
        let dev = inc.iter().map(|i| (i - mean).abs() / mean).fold(0.0, f64::max);
        ok &= dev <= 0.15;
        parts.push(format!("n_ua {n_ua}: nnz {nnz:?}, max increment deviation {:.1}%", 100.0 * dev));
    }
    check(ok, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let s = AdmmSettings { eta: 1e-6, ..AdmmSettings::default() };
    let mut worst = 0.0f64;
    for k in 0..50u64 {
        let n = 5 + (k as usize * 7) % 36;
        let m = 1 + (k as usize * 13) % 60;
        let data = random_hlsp(&RandomHlspSpec { n, levels: 1, rows_per_level: m, inequality_share: 0.0 }, 100 + k);
        let a = data.levels[0].a.to_dense();
        let an = DMatrix::from_fn(m, n, |i, j| a[(i, j)]);
        let b = DVector::from_column_slice(&data.levels[0].b);
        let x = an.svd(true, true).solve(&b, 1e-12).expect("svd");
        let sol = solve_hlsp(&data, &s, None).map_err(|e| format!("instance {k}: {e}"))?;
        let diff: f64 = sol.dx.iter().zip(x.iter()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        worst = worst.max(diff / x.norm().max(1.0));
    }
    let mut protection = 0.0f64;
    for seed in 0..20u64 {
        let data = random_hlsp(&RandomHlspSpec { n: 20, levels: 2, rows_per_level: 15, inequality_share: 0.5 }, seed);
        let sol = solve_hlsp(&data, &s, None).map_err(|e| format!("two-level {seed}: {e}"))?;
        let top = &data.levels[0];
        let ax = top.a.mul_vec(&sol.dx);
        for i in 0..top.rows() {
            protection = protection.max((ax[i] - top.b[i] - sol.v_star(0)[i]).abs());
        }
    }
    check(
        worst <= 1e-3 && protection <= 10.0 * s.eta,
        format!(
            "worst relative error {worst:.2e} over 50 problems, top-level deviation {protection:.2e} (limit {:.0e})",
            10.0 * s.eta
        ),
    )
}

fn criterion_6() -> Outcome {
    let data = random_hlsp(&RandomHlspSpec::default(), 6);
    let s = AdmmSettings::default();
    let first = solve_hlsp(&data, &s, None).map_err(|e| e.to_string())?;
    let again = solve_hlsp(&data, &s, Some((&first.warm, WarmMode::Resolve))).map_err(|e| e.to_string())?;
    check(
        again.iterations == 0 && again.dx == first.dx,
        format!(
            "first solve {} iterations, re-solve {} iterations, step unchanged {}",
            first.iterations,
            again.iterations,
            again.dx == first.dx
        ),
    )
}

fn criterion_7() -> Outcome {
    let (base, _) = testfuncs(1e-12, 2000);
    let (hot, _) = testfuncs(100.0, 2000);
    let mut ok = hot.outer_iterations > base.outer_iterations;
    let mut parts = Vec::new();
    for level in [2usize, 3, 5, 8] {
        let s = &hot.levels[level - 1];
        let f2 = s.slack_norm * s.slack_norm;
        ok &= f2 > s.eps;
        parts.push(format!("L{level} |f+|^2 {f2:.2e} vs eps {:.1e}", s.eps));
    }
    check(ok, format!("{}; outer iterations {} vs {}", parts.join(", "), hot.outer_iterations, base.outer_iterations))
}

fn criterion_8() -> Outcome {
    let opts =
        RunOptions { problem: Problem::Cartpole, settings: Settings::default(), seed: 0, threads: 1, timing: false };
    let start = Instant::now();
    let report = run(&opts).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    let m = report.cartpole.expect("cart-pole metrics");
    let ok = m.dynamics_residual <= 1e-4
        && m.bound_violation <= 1e-6
        && m.virtual_control <= 1e-6
        && m.task_error < m.zero_control_task_error
        && t <= Duration::from_secs(600);
    check(
        ok,
        format!(
            "task {:.4} vs zero control {:.4}, dynamics {:.1e}, bounds {:.1e}, virtual {:.1e}, {} ({} outer) in {:.0} s",
            m.task_error, m.zero_control_task_error, m.dynamics_residual, m.bound_violation, m.virtual_control, report.status, report.outer_iterations, secs(t)
        ),
    )
}

fn run_binary(dir: &Path, name: &str, args: &[&str]) -> Result<(Vec<u8>, Vec<u8>), String> {
    let out = dir.join(name);
    let status = Command::new(env!("CARGO_BIN_EXE_lexls"))
        .args(args)
        .arg("--out")
        .arg(&out)
        .status()
        .map_err(|e| e.to_string())?;
    if status.code() == Some(1) {
        return Err(format!("{args:?} failed"));
    }
    let csv = std::fs::read(&out).map_err(|e| e.to_string())?;
    let mut trace = out.into_os_string();
    trace.push(".trace.json");
    Ok((csv, std::fs::read(trace).map_err(|e| e.to_string())?))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = true;
    for args in [
        &["run", "random-hlsp", "--seed", "42"][..],
        &["run", "testfuncs", "--seed", "42"][..],
        &["run", "turnback-bench", "--seed", "42", "--T", "5..15"][..],
    ] {
        let a = run_binary(dir.path(), "a.csv", args)?;
        let b = run_binary(dir.path(), "b.csv", args)?;
        let same = a == b && !a.0.is_empty();
        ok &= same;
        parts.push(format!("{} identical {same}", args[1]));
    }
    check(ok, parts.join(", "))
}

fn main() {
    let criteria: [(usize, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = 0;
    for (n, f) in criteria {
        match f() {
            Ok(detail) => println!("criterion {n}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL ({detail})");
            }
        }
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
