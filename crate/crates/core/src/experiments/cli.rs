//! Command-line front end shared by the `orbitlab` binary and the tests.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::experiments::config::{
    transversality_preset, ExperimentConfig, ExperimentKind, RunSpec, SharpnessCase,
};
use crate::experiments::run_with_jobs;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "orbitlab", version, about = "Orbit recovery experiments under semi-algebraic priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a bound calculator.
    Bounds(Common),
    /// Monte Carlo search for nontrivial orbit/prior intersections.
    Transversality {
        #[command(flatten)]
        common: Common,
        /// Named setup: sign-grid-2d, sign-ray-circle-2d, so2-two-lines,
        /// sign-subspace.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
    },
    /// Reproduce the threshold-sharpness examples.
    Sharpness {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, conflicts_with = "config")]
        case: Option<CaseArg>,
    },
    /// Recovery success rate across prior dimensions.
    RecoverSweep(Common),
    /// Rowsort collision search over all row permutations.
    Separator(Common),
    /// Recovery error against the number of noisy observations.
    MraNoise(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment configuration; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CaseArg {
    ParabolaGl,
    ParabolaAff,
    Z4Grid,
    So2Points,
}

impl From<CaseArg> for SharpnessCase {
    fn from(c: CaseArg) -> Self {
        match c {
            CaseArg::ParabolaGl => SharpnessCase::ParabolaGl,
            CaseArg::ParabolaAff => SharpnessCase::ParabolaAff,
            CaseArg::Z4Grid => SharpnessCase::Z4Grid,
            CaseArg::So2Points => SharpnessCase::So2Points,
        }
    }
}

/// Exit code for an error raised while running.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) => EXIT_CONFIG,
        Error::BudgetExceeded { .. } | Error::InfeasibleRank { .. } | Error::Precondition(_) => {
            EXIT_INFEASIBLE
        }
        _ => EXIT_INTERNAL,
    }
}

/// Parses `argv` (program name first), runs and writes the report. Returns
/// the process exit code; diagnostics go to standard error.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("orbitlab: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let (kind, common, preset, case) = match cli.command {
        Command::Bounds(c) => (ExperimentKind::Bounds, c, None, None),
        Command::Transversality { common, preset } => {
            (ExperimentKind::Transversality, common, preset, None)
        }
        Command::Sharpness { common, case } => (ExperimentKind::Sharpness, common, None, case),
        Command::RecoverSweep(c) => (ExperimentKind::RecoverSweep, c, None, None),
        Command::Separator(c) => (ExperimentKind::Separator, c, None, None),
        Command::MraNoise(c) => (ExperimentKind::MraNoise, c, None, None),
    };
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default_for(kind),
    };
    if config.run.kind() != kind {
        return Err(Error::Config(format!(
            "configuration describes `{}` but the subcommand is `{}`",
            config.run.kind().name(),
            kind.name()
        )));
    }
    if let Some(name) = preset {
        config.run = transversality_preset(&name)
            .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))?;
    }
    if let Some(case) = case {
        config.run = RunSpec::Sharpness { case: case.into() };
    }
    if let Some(seed) = common.seed {
        config.base_seed = seed;
    }
    if let Some(trials) = common.trials {
        config.trials = trials;
    }
    config.validate()?;

    let report = run_with_jobs(&config, common.jobs)?;
    let text = match common.format {
        Format::Json => report.to_json() + "\n",
        Format::Csv => report.to_csv()?,
    };
    match &common.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_and_bad_flags() {
        assert_eq!(main_with_args(["orbitlab", "--help"]), EXIT_OK);
        assert_eq!(main_with_args(["orbitlab", "bounds", "--format", "xml"]), EXIT_CONFIG);
        assert_eq!(main_with_args(["orbitlab", "nope"]), EXIT_CONFIG);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Precondition("x".into())), EXIT_INFEASIBLE);
        assert_eq!(exit_code(&Error::BudgetExceeded { needed: 2, budget: 1 }), EXIT_INFEASIBLE);
        assert_eq!(exit_code(&Error::InvalidArgument("x".into())), EXIT_INTERNAL);
    }
}
