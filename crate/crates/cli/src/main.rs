use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "erasure", version, about = "Feedback erasure of a bit in a duty-ratio-controlled double-well trap")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibrium checks, σ_T estimate and the reconstructed potential.
    Calibrate,
    /// One ensemble at a single duty ratio.
    Erase(commands::EraseArgs),
    /// Feedback and open-loop ensembles over the configured duty ratios.
    Sweep,
    /// Weighted least-squares fit of the feedback sweep.
    Fit,
    /// Measurement mutual information by quadrature and Monte Carlo.
    Mi,
    /// Second-law ledger and deficit comparison from earlier outputs.
    Report,
}

/// Errors that exit with status 1 rather than 2.
#[derive(Debug)]
pub struct ValidationError(pub String);

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationError {}

fn exit_status(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ValidationError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<erasure_core::Error>() {
            return if e.is_validation() { 1 } else { 2 };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage_error { 1 } else { 0 });
        }
    };
    let result = commands::Context::new(&cli.global).and_then(|ctx| match &cli.command {
        Command::Calibrate => commands::calibrate(&ctx),
        Command::Erase(args) => commands::erase(&ctx, args),
        Command::Sweep => commands::sweep(&ctx),
        Command::Fit => commands::fit(&ctx),
        Command::Mi => commands::mi(&ctx),
        Command::Report => commands::report(&ctx),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_status(&err))
        }
    }
}
