use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Batch driver for the numerical experiments of the closure
/// laboratory: commutator towers, renormalization schedules, graded
/// brackets, flow comparison, sphere-measure diagnostics and
/// orbit-equivalence checks.
#[derive(Parser)]
#[command(name = "closure-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a flat `section.key = value` config file
    Run { config: PathBuf },
    /// List the experiment kinds with every config key and its default
    List,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::List => {
            print!("{}", closure_lab::config::list_text());
            ExitCode::SUCCESS
        }
        Command::Run { config } => match closure_lab::run(&config) {
            Ok(report) => {
                println!("report written to {}", report.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code())
            }
        },
    }
}
