//! `gafs`: unsupervised feature selection from the command line.
//!
//! Exit status is 0 on success, 1 on runtime or numerical failure and 2 on
//! usage or validation errors. Errors are reported on stderr as a single
//! line, `error[<category>]: <message>`.

mod commands;
mod common;
mod config;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "gafs",
    version,
    about = "Graph- and autoencoder-based unsupervised feature selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the model on a dataset and rank its features.
    Select(commands::select::SelectArgs),
    /// Score the top-ranked features with k-means (ACC, NMI) and a classifier.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Sweep hidden size, λ and γ, evaluating several feature percentages per cell.
    Grid(commands::grid::GridArgs),
    /// Write a synthetic dataset with known informative features.
    Synth(commands::synth::SynthArgs),
}

fn one_line(msg: &str) -> String {
    msg.lines()
        .map(str::trim)
        .filter(|l| {
            !l.is_empty() && !l.starts_with("Usage:") && !l.starts_with("For more information")
        })
        .map(|l| l.strip_prefix("error: ").unwrap_or(l))
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) if e.kind() == clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error[usage]: {}", one_line(&e.to_string()));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Select(a) => commands::select::run(a),
        Command::Evaluate(a) => commands::evaluate::run(a),
        Command::Grid(a) => commands::grid::run(a),
        Command::Synth(a) => commands::synth::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> ExitCode {
    eprintln!("error[{}]: {}", e.category(), one_line(&e.to_string()));
    ExitCode::from(e.exit_code() as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn clap_errors_fold_to_one_line() {
        let msg = "error: the following required arguments were not provided:\n  --out <OUT>\n\nUsage: gafs select --out <OUT>\n\nFor more information, try '--help'.\n";
        assert_eq!(
            one_line(msg),
            "the following required arguments were not provided: --out <OUT>"
        );
    }
}
