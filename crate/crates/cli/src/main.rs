use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Sensitivity(a) => commands::sensitivity(a),
        Command::Rfactor(a) => commands::rfactor(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::CheckConditions(a) => commands::check_conditions(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
