use std::process::ExitCode;

use clap::Parser;
use openpatch::commands::{configure_threads, run, Cli};

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(&cli, raw));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("openpatch: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
