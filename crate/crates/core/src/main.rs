use std::process::ExitCode;

use clap::Parser;
use vallab::cli::{configure_threads, error_exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| run(&cli));
    match result {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("vallab: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
