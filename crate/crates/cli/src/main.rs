//! `depthscan`: command-line pipeline over `depthscan-core`.
//!
//! Exit codes: 0 success, 1 numerical failure (non-convergence), 2 usage or
//! input errors. Diagnostics go to standard error; reports to standard output.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Depth2normals(a) => commands::depth2normals(a),
        Command::Normals2depth(a) => commands::normals2depth(a),
        Command::Depth2mesh(a) => commands::depth2mesh(a),
        Command::Eval(a) => commands::eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
