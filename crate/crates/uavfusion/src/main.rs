use std::process::ExitCode;

use clap::Parser;
use uavfusion::cli::{run, Cli, CliError};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                CliError::CONFIG as u8
            } else {
                0
            });
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            log::error!("{}", e.message);
            ExitCode::from(e.code as u8)
        }
        Err(_) => ExitCode::from(CliError::UNEXPECTED as u8),
    }
}
