use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use saddle_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = execute(&cli).and_then(|o| o.emit().map(|_| o.gates_passed));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("saddle: one or more verification gates failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("saddle: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
