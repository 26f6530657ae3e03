mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::{SimulateArgs, Status};
use error::CliError;

fn dispatch(cli: &Cli) -> Result<commands::Outcome, CliError> {
    let out = cli.out;
    match &cli.command {
        Command::Constants { k } => commands::constants(*k, out),
        Command::Potentials { input, solver } => commands::potentials(input, solver, out),
        Command::Ratio { input } => commands::ratio(input, out),
        Command::Verify { k, trials, seed, tol, slack } => commands::verify(*k, *trials, *seed, *tol, *slack, out),
        Command::Simulate { input, steps, trials, seed, no_audit, transcript } => commands::simulate(
            input,
            SimulateArgs {
                steps: *steps,
                trials: *trials,
                seed: *seed,
                audit: !no_audit,
                transcript: transcript.as_deref(),
            },
            out,
        ),
        Command::Sweep { k, r, threshold, near_optimal } => commands::sweep(*k, r, *threshold, *near_optimal, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(outcome) => {
            print!("{}", outcome.text);
            if !outcome.text.ends_with('\n') {
                println!();
            }
            ExitCode::from(match outcome.status {
                Status::Ok => 0,
                Status::CheckFailed => 2,
                Status::AuditFailed => 3,
            })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
