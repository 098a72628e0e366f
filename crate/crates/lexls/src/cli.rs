//! Argument parsing and exit codes.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigError, Settings};
use crate::run::{run, Format, Problem, RunOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "lexls", version, about = "Nonlinear lexicographic least-squares benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve one benchmark problem and write its result table.
    Run(RunArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Problem to run.
    #[arg(value_enum)]
    pub problem_name: Option<Problem>,
    /// Problem to run, as a flag.
    #[arg(long, value_enum)]
    pub problem: Option<Problem>,
    /// Flat `key=value` settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Result file; stdout when absent. CSV output also writes the JSON
    /// trace to `<out>.trace.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads for the nullspace construction.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub eps_init: Option<f64>,
    /// Horizons of turnback-bench: `a..b` (step 5), `a..b:step` or a list.
    #[arg(long = "T")]
    pub horizons: Option<String>,
    /// Unactuated joint counts of turnback-bench, comma separated.
    #[arg(long)]
    pub nua: Option<String>,
    /// Fill the time_ms column; results then differ between runs.
    #[arg(long)]
    pub timing: bool,
}

fn parse_usize_list(flag: &str, text: &str) -> Result<Vec<usize>, ConfigError> {
    let bad = || ConfigError::BadValue { line: 0, key: flag.to_string(), value: text.to_string() };
    if let Some((lo, rest)) = text.split_once("..") {
        let (hi, step) = match rest.split_once(':') {
            Some((h, s)) => (h, s.parse::<usize>().map_err(|_| bad())?),
            None => (rest, 5),
        };
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if step == 0 || hi < lo {
            return Err(bad());
        }
        return Ok((lo..=hi).step_by(step).collect());
    }
    text.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect()
}

/// Everything a run needs, checked before any file is written.
pub fn resolve(args: &RunArgs) -> Result<RunOptions, ConfigError> {
    let problem = match (args.problem_name, args.problem) {
        (Some(a), Some(b)) if a != b => {
            return Err(ConfigError::Invalid(format!("problem given twice: {} and {}", a.name(), b.name())))
        }
        (Some(p), _) | (None, Some(p)) => p,
        (None, None) => return Err(ConfigError::Invalid("no problem given".into())),
    };
    let mut settings = Settings::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("cannot read {}: {e}", path.display())))?;
        settings.apply_text(&text)?;
    }
    if let Some(m) = args.max_outer {
        settings.solver.max_outer = m;
    }
    if let Some(e) = args.eps_init {
        settings.solver.eps_init = e;
    }
    if let Some(t) = &args.horizons {
        settings.bench.horizons = parse_usize_list("--T", t)?;
    }
    if let Some(u) = &args.nua {
        settings.bench.n_ua = parse_usize_list("--nua", u)?;
    }
    if args.threads == 0 {
        return Err(ConfigError::Invalid("--threads must be positive".into()));
    }
    settings.validate()?;
    Ok(RunOptions { problem, settings, seed: args.seed, threads: args.threads, timing: args.timing })
}

fn trace_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".trace.json");
    PathBuf::from(s)
}

/// Runs the command and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let Command::Run(args) = &cli.command;
    let opts = match resolve(args) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("lexls: {e}");
            return EXIT_CONFIG;
        }
    };
    let report = match run(&opts) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("lexls: {e}");
            return EXIT_CONFIG;
        }
    };
    let body = match args.format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
    };
    let written = match &args.out {
        None => {
            print!("{body}");
            Ok(())
        }
        Some(path) => std::fs::write(path, &body).and_then(|_| match args.format {
            Format::Csv => std::fs::write(trace_path(path), report.to_json()),
            Format::Json => Ok(()),
        }),
    };
    if let Err(e) = written {
        eprintln!("lexls: cannot write results: {e}");
        return EXIT_CONFIG;
    }
    if report.converged {
        EXIT_OK
    } else {
        eprintln!("lexls: {} did not converge ({})", report.problem, report.status);
        EXIT_NOT_CONVERGED
    }
}
