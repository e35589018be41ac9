mod bench;
mod config;
mod model;
mod verify;

use std::process::ExitCode;

use clap::Parser;

use config::{CliResult, Command, RunConfig};

fn dispatch(cfg: &RunConfig) -> CliResult<()> {
    match cfg.cmd {
        Command::Verify => verify::run(cfg),
        Command::Bench => bench::run(cfg),
        Command::Model => model::run_model(cfg),
        Command::Storage => model::run_storage(cfg),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on malformed flags
    let cfg = RunConfig::parse();
    match dispatch(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
