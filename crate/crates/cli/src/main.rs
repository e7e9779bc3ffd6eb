use std::process::ExitCode;

use clap::Parser;

use coalesce_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match coalesce_cli::run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
