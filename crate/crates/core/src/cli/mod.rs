//! Command-line driver: `deltasl <task> --config run.toml [--out report.json]`.
//!
//! Reports are deterministic: the JSON embeds the resolved config and the
//! library version, while wall-clock time goes to a `<out>.timing.json`
//! sidecar (or stderr) so repeated seeded runs compare byte for byte.

pub mod config;
pub mod tasks;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

pub use config::{Format, RunConfig, Task, TaskParams};
pub use tasks::{run_task, truncate_halfline, TaskOutput, TruncationReport};

use crate::error::Error;
use crate::model::validate;
use crate::tolerances::{Tolerances, PROFILE_ENV};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "deltasl", version, about = "Sturm-Liouville operators with δ and δ′ point interactions")]
#[command(after_help = format!("The tolerance profile (default, strict, fast) is read from {PROFILE_ENV}."))]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Master seed for coupling ensembles, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Check the problem and report every violation.
    Validate,
    /// Shoot one solution and dump its trace.
    Shoot,
    /// Diagonal Green function over a grid of spectral parameters.
    GreenSweep,
    /// Residuals of the Krein relation between two couplings at one site.
    KreinCheck,
    /// Eigenvalues in an energy window.
    Spectrum,
    /// Decide whether E is an eigenvalue for all couplings or almost none.
    Classify,
    /// Oscillation certificates and their cross-check.
    Certify,
    /// Monte-Carlo hit fraction at one energy.
    Montecarlo,
    /// Monte-Carlo hit fractions over an energy grid.
    Scan,
    /// Rerun a task at several truncations of a half-line problem.
    Truncate,
}

impl Command {
    fn task(self) -> Option<Task> {
        Some(match self {
            Command::Validate => return None,
            Command::Shoot => Task::Shoot,
            Command::GreenSweep => Task::GreenSweep,
            Command::KreinCheck => Task::KreinCheck,
            Command::Spectrum => Task::Spectrum,
            Command::Classify => Task::Classify,
            Command::Certify => Task::Certify,
            Command::Montecarlo => Task::Montecarlo,
            Command::Scan => Task::Scan,
            Command::Truncate => Task::Truncate,
        })
    }
}

/// Failure of a CLI run, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::Config(_) | Error::Invalid(_) => EXIT_CONFIG,
            _ => EXIT_COMPUTE,
        };
        CliError { code, message: err.to_string() }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError { code: EXIT_COMPUTE, message: format!("cannot write {}: {e}", p.display()) }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn timing_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".timing.json");
    PathBuf::from(name)
}

/// Executes a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    if let Some(n) = cli.threads {
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError { code: EXIT_CONFIG, message: "--config <path> is required".into() })?;
    let mut cfg = RunConfig::load(path)?;
    let tol = cfg.resolve(Tolerances::from_env()?, cli.seed)?;
    let out = cli.out.clone().or_else(|| cfg.output.path.clone());
    let format = cli.format.unwrap_or(cfg.output.format);

    let Some(task) = cli.command.task() else {
        let problem = cfg.problem.problem();
        let mut report = validate(&problem);
        if let Err(Error::Domain(msg)) = problem.check_coupling(&cfg.couplings()?) {
            report.ok = false;
            report.violations.push(crate::model::Violation { field: "couplings".into(), site: None, message: msg });
        }
        let text = serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n";
        write_output(out.as_deref(), &text)?;
        return if report.ok {
            Ok(())
        } else {
            Err(CliError { code: EXIT_CONFIG, message: format!("invalid problem: {report}") })
        };
    };
    if let Some(declared) = cfg.task {
        if declared != task {
            return Err(CliError {
                code: EXIT_CONFIG,
                message: format!("config declares task `{}` but `{}` was requested", declared.name(), task.name()),
            });
        }
    }
    cfg.task = Some(task);

    let output = run_task(task, &cfg, &tol).map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", task.name(), err.message);
        err
    })?;
    let text = match format {
        Format::Csv => output.csv,
        Format::Json => {
            let report = json!({
                "tool": "deltasl",
                "version": crate::VERSION,
                "task": task.name(),
                "config": cfg,
                "result": output.result,
            });
            serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n"
        }
    };
    write_output(out.as_deref(), &text)?;

    let seconds = started.elapsed().as_secs_f64();
    match out {
        Some(p) => {
            let timing = json!({ "task": task.name(), "wall_clock_seconds": seconds });
            write_output(Some(&timing_path(&p)), &(timing.to_string() + "\n"))?;
        }
        None => eprintln!("{}: {seconds:.3} s", task.name()),
    }
    Ok(())
}

/// Parses `args` and runs; the return value is the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
