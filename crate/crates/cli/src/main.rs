mod cli;
mod config;
mod error;
mod output;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::error::ErrorKind;
use clap::Parser;

use crate::cli::Cli;
use crate::config::{RunConfig, OUTPUT_DIR_ENV};
use crate::error::{ErrorRecord, EXIT_CONFIG};
use crate::tasks::SweepFailure;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            eprintln!("{}", ErrorRecord::new(EXIT_CONFIG, msg.trim().to_string(), Vec::new()).to_json());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = ErrorRecord::from_error(&err);
            eprintln!("{}", record.to_json());
            ExitCode::from(record.exit_code as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let env_dir = std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    let cfg = RunConfig::resolve(&cli.command, env_dir)?;
    let artifacts = match tasks::run_job(&cfg) {
        Ok(a) => a,
        Err(err) => {
            if let Some(failure) = err.downcast_ref::<SweepFailure>() {
                for path in failure.partial.commit(&cfg.output_dir)? {
                    println!("{}", path.display());
                }
            }
            return Err(err);
        }
    };
    for path in artifacts.commit(&cfg.output_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}
