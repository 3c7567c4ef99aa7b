use std::process::ExitCode;

use clap::Parser;
use dualpi_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dualpi_cli::run(&cli, &mut std::io::stdout()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dualpi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
