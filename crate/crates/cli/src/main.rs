use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rydberg_reuse::validation::Hooks;
use rydberg_sim::{execute, validate, with_threads, CliError, Command, RunConfig};

/// Monte-Carlo spectral-efficiency sweeps for Rydberg reuse receiver arrays.
#[derive(Parser)]
#[command(name = "rydberg-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sweep the SNR for every configured receiver.
    SweepSnr(RunArgs),
    /// Sweep the number of RF / laser chains.
    SweepChains(RunArgs),
    /// Sweep the LO or APD reuse depth.
    SweepDepth(RunArgs),
    /// Mean objective per alternating-minimization iteration.
    Convergence(RunArgs),
    /// Run the built-in oracle checks.
    Validate(ThreadArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment description.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured trial count.
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    threads: ThreadArgs,
}

#[derive(Args)]
struct ThreadArgs {
    /// Worker threads (results do not depend on this).
    #[arg(long, env = "SIM_THREADS")]
    threads: Option<usize>,
}

fn run_config(command: Command, a: RunArgs) -> RunConfig {
    RunConfig {
        command,
        config_path: a.config,
        output_dir: a.out,
        seed: a.seed,
        trials: a.trials,
        threads: a.threads.threads,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let run = match cli.command {
        Cmd::SweepSnr(a) => run_config(Command::SweepSnr, a),
        Cmd::SweepChains(a) => run_config(Command::SweepChains, a),
        Cmd::SweepDepth(a) => run_config(Command::SweepDepth, a),
        Cmd::Convergence(a) => run_config(Command::Convergence, a),
        Cmd::Validate(t) => {
            let result = with_threads(t.threads, || validate(&Hooks::default(), &mut std::io::stdout().lock()));
            return match result {
                Ok(Ok(true)) => ExitCode::SUCCESS,
                Ok(Ok(false)) => {
                    eprintln!("error: one or more checks failed");
                    ExitCode::from(2)
                }
                Ok(Err(e)) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match execute(&run) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_) | CliError::Invalid(_)) && e.exit_code() == 1 {
                eprintln!("usage: rydberg-sim {} --config <path> --out <dir> [--seed <u64>] [--trials <n>] [--threads <n>]", run.command);
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
