use std::process::ExitCode;

use clap::Parser;
use uvt_cli::args::{Cli, Command};
use uvt_cli::{commands, configure_threads, CliError};

fn run(cli: Cli) -> Result<i32, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Simulate(a) => print!("{}", commands::simulate(&a)?),
        Command::Reconstruct(a) => print!("{}", commands::reconstruct(&a)?),
        Command::Evaluate(a) => {
            let row = commands::evaluate(&a)?;
            println!(
                "{} rrmse={} ssim={} cc={}",
                row.method, row.rrmse, row.ssim, row.cc
            );
        }
        Command::Report(a) => print!("{}", commands::report(&a)?),
        Command::Selftest(a) => {
            let (text, ok) = commands::selftest(&a)?;
            print!("{text}");
            if !ok {
                return Ok(4);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
