//! Command-line runner for the lexls solvers: settings files, problem
//! dispatch and deterministic CSV/JSON result files.

pub mod cli;
pub mod config;
pub mod run;

pub use cli::{execute, Cli};
pub use config::{ConfigError, Settings};
pub use run::{run, Format, Problem, RunOptions, RunReport};
