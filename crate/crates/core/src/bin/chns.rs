use std::process::ExitCode;

use clap::Parser;

use chns_core::cli::{configure_workers, run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = configure_workers()
        .and_then(|_| Cli::parse().into_config())
        .and_then(|cfg| run(&cfg));
    match result {
        Ok(summary) => {
            log::info!("finished after {} steps", summary.steps);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
