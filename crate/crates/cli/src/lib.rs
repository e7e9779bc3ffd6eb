//! Command-line front end: `explain`, `compare` and `bench`.

pub mod args;
pub mod commands;
pub mod output;

use args::{Cli, Command};

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> anyhow::Result<i32> {
    match &cli.command {
        Command::Explain(a) => commands::cmd_explain(a),
        Command::Compare(a) => commands::cmd_compare(a),
        Command::Bench(a) => commands::cmd_bench(a),
    }
}
