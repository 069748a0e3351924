//! Library side of the `rydberg-sim` command: configuration loading, run
//! orchestration and table/plot output. The binary is a thin clap wrapper.

pub mod config;
pub mod output;
pub mod plot;

use std::io::Write;
use std::path::PathBuf;

use rydberg_reuse::evaluation::{run_convergence, run_experiment, TrialFailure};
use rydberg_reuse::validation::{run_checks, Hooks};

pub use config::{parse_config, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed configuration {path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(rydberg_reuse::Error),
    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    /// 1 for usage, configuration and I/O problems, 2 for numeric or solver
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numeric(_) => 2,
            CliError::Invalid(e) if e.is_numeric() => 2,
            _ => 1,
        }
    }
}

/// One invocation of a sweep or convergence command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub config_path: PathBuf,
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub threads: Option<usize>,
}

/// Runs `f` on a pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn failure_report(failures: &[TrialFailure]) -> String {
    let mut msg = format!("{} trial evaluation(s) failed:", failures.len());
    for f in failures.iter().take(10) {
        msg.push_str(&format!("\n  trial {} `{}`: {}", f.trial, f.label, f.error));
    }
    if failures.len() > 10 {
        msg.push_str(&format!("\n  ... {} more", failures.len() - 10));
    }
    msg
}

/// Loads, validates and runs the configured experiment, then writes its
/// outputs. Returns the files written. Trials that fail are left out of the
/// averages and reported as a numeric error after the outputs are written.
pub fn execute(run: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    if run.command == Command::Validate {
        return Err(CliError::Usage("validate takes no configuration".into()));
    }
    let mut spec = parse_config(&run.config_path)?;
    if let Some(seed) = run.seed {
        spec.seed = seed;
    }
    if let Some(trials) = run.trials {
        spec.trials = trials;
    }
    config::check_command(run.command, &spec)?;

    if run.command == Command::Convergence {
        let rows = with_threads(run.threads, || run_convergence(&spec))?.map_err(CliError::Invalid)?;
        return output::emit_convergence(&rows, &spec, &run.output_dir);
    }
    let (table, failures) = with_threads(run.threads, || run_experiment(&spec))?.map_err(CliError::Invalid)?;
    let written = output::emit_results(&table, &spec, &run.output_dir)?;
    if !failures.is_empty() {
        return Err(CliError::Numeric(failure_report(&failures)));
    }
    Ok(written)
}

/// Runs the oracle suite, printing one line per check. Returns whether every
/// check passed or was skipped.
pub fn validate(hooks: &Hooks, out: &mut impl Write) -> std::io::Result<bool> {
    let reports = run_checks(hooks);
    for r in &reports {
        writeln!(out, "{r}")?;
    }
    Ok(!reports.iter().any(|r| r.failed()))
}
