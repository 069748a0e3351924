use std::fmt;
use std::path::Path;

use rydberg_reuse::evaluation::{ExperimentSpec, Sweep};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SweepSnr,
    SweepChains,
    SweepDepth,
    Convergence,
    Validate,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::SweepSnr => "sweep-snr",
            Command::SweepChains => "sweep-chains",
            Command::SweepDepth => "sweep-depth",
            Command::Convergence => "convergence",
            Command::Validate => "validate",
        })
    }
}

/// Reads a JSON experiment description and validates it completely.
pub fn parse_config(path: &Path) -> Result<ExperimentSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    let spec: ExperimentSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Malformed { path: path.to_path_buf(), message: e.to_string() })?;
    spec.validate().map_err(CliError::Invalid)?;
    Ok(spec)
}

/// Checks that the sweep in `spec` is the one `command` runs, and that the
/// overridden spec is still valid.
pub fn check_command(command: Command, spec: &ExperimentSpec) -> Result<(), CliError> {
    let ok = match command {
        Command::SweepSnr => spec.sweep == Sweep::Snr,
        Command::SweepChains => matches!(spec.sweep, Sweep::Chains { .. }),
        Command::SweepDepth => matches!(spec.sweep, Sweep::LoDepth { .. } | Sweep::ApdDepth { .. }),
        Command::Convergence => true,
        Command::Validate => false,
    };
    if !ok {
        return Err(CliError::Usage(format!(
            "{command} cannot run a `{}` sweep; use {}",
            spec.sweep.param_name(),
            match spec.sweep {
                Sweep::Snr => "sweep-snr",
                Sweep::Chains { .. } => "sweep-chains",
                _ => "sweep-depth",
            }
        )));
    }
    spec.validate().map_err(CliError::Invalid)?;
    Ok(())
}
