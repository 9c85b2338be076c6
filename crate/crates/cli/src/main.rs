use std::process::ExitCode;

use clap::Parser;
use skillchain_cli::{dispatch, Cli, CliError};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli.command) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = e.exit_code();
            match e {
                CliError::Validation(msg) if msg.contains('\n') => {
                    let (body, last) = msg.trim_end().rsplit_once('\n').expect("has newline");
                    println!("{body}");
                    eprintln!("error: {last}");
                }
                e => eprintln!("error: {e}"),
            }
            ExitCode::from(code as u8)
        }
    }
}
