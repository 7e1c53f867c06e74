//! Command-line entry point. Exit codes: 0 success, 2 usage, 3 I/O,
//! 4 solver failure.

mod args;
mod commands;
mod io;

use clap::Parser;

use args::{Cli, Command};
use commands::CmdResult;

fn run(cli: Cli) -> CmdResult {
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::run_fit(a),
        Command::Path(a) => commands::run_path(a),
        Command::Cv(a) => commands::run_cv(a),
        Command::Eval(a) => commands::run_eval(a),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.code());
        }
    }
}
