//! `poolprop` command-line front end.
//!
//! Exit status: 0 on success, 1 on a fatal error, 2 when a batch finished
//! but skipped images that failed.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = args::Cli::parse();
    match commands::run(cli) {
        Ok(commands::Outcome::Complete) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Partial(skipped)) => {
            log::warn!("{skipped} input(s) failed and were skipped");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
