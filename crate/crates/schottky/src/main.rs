use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use schottky::cli::{parse_args, run, EXIT_MALFORMED};

fn main() -> ExitCode {
    let cli = match parse_args(std::env::args_os()) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_MALFORMED,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            if let Some(msg) = &outcome.message {
                eprint!("{msg}");
            }
            let written = match &cli.command.manifest().out {
                Some(path) => std::fs::write(path, &outcome.output),
                None => std::io::stdout().write_all(&outcome.output),
            };
            if let Err(e) = written {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(EXIT_MALFORMED);
            }
            ExitCode::from(outcome.code)
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
