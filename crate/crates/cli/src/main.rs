#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod statefile;
mod verify;

use commands::{FormEvalArgs, SpecfunArgs, SweepArgs};
use config::CommonArgs;
use verify::VerifyArgs;

/// Self-adjoint two-anyon Hamiltonians: forms, spectra and checks.
///
/// Energies are in the units of the relative problem (hbar = 1, m = 1/2).
#[derive(Parser)]
#[command(name = "anyons", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// K_alpha(x) and its derivative.
    Specfun(SpecfunArgs),
    /// Evaluate the quadratic form on a sampled s-wave state.
    FormEval(FormEvalArgs),
    /// Rayleigh-Ritz spectrum for one configuration.
    Spectrum(CommonArgs),
    /// Ground energies over an (alpha, beta) grid, as CSV.
    Sweep(SweepArgs),
    /// Run the verification suites.
    Verify(VerifyArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let err = error::CliError::Config(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let mut out = io::stdout().lock();
    let result = match &cli.command {
        Command::Specfun(a) => commands::specfun(a, &mut out),
        Command::FormEval(a) => commands::form_eval(a, &mut out),
        Command::Spectrum(a) => commands::spectrum(a, &mut out),
        Command::Sweep(a) => commands::sweep(a, &mut out),
        Command::Verify(a) => verify::verify(a, &mut out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
