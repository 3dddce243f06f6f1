//! Command-line surface for the panoramic video decomposition pipeline.
//!
//! The subcommands chain through versioned JSON manifests: `synth` and
//! `register` produce stacks, `corrupt` perturbs them, `decompose` splits
//! them into components, and `evaluate` scores an estimate against scene
//! ground truth. Every run is reproducible from its flags and seed.
//!
//! Exit codes: 0 on success, 1 on validation or I/O errors, 2 when the
//! numerics fail (solver divergence, non-finite values).

mod commands;
mod io;
mod manifest;
mod parse;
mod runconfig;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::{corrupt, decompose, evaluate, register, synth};

#[derive(Parser)]
#[command(
    name = "panorpca",
    version,
    about = "Panoramic low-rank + sparse + smooth video decomposition"
)]
struct Cli {
    /// Log phase progress to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Register an image sequence onto a panoramic canvas.
    Register(register::Args),
    /// Split a registered stack into low-rank, sparse, and smooth parts.
    Decompose(decompose::Args),
    /// Apply salt-and-pepper or Gaussian corruption to a stack.
    Corrupt(corrupt::Args),
    /// Score an estimate against scene ground truth.
    Evaluate(evaluate::Args),
    /// Generate a synthetic scene with ground-truth annotations.
    Synth(synth::Args),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let informational =
                matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = err.print();
            return if informational {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };

    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Register(args) => register::run(args),
        Command::Decompose(args) => decompose::run(args),
        Command::Corrupt(args) => corrupt::run(args),
        Command::Evaluate(args) => evaluate::run(args),
        Command::Synth(args) => synth::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// Numerical failures are distinguished from validation problems by the
/// library error anywhere in the chain.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    use panorpca::Error;
    let numerical = err.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<Error>(),
            Some(Error::Diverged { .. } | Error::NonFinite(_) | Error::SvdFailed)
        )
    });
    if numerical {
        2
    } else {
        1
    }
}
