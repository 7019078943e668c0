mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;
use mixorder::MixError;

use config::{Cli, Command};

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Criteria(a) => commands::criteria(a),
        Command::Gibbs(a) => commands::gibbs(a),
        Command::Marglik(a) => commands::marglik(a),
        Command::Sparse(a) => commands::sparse(a),
        Command::BootstrapLrt(a) => commands::bootstrap(a),
    }
}

/// 2 for numerical failures, 1 for everything the caller can fix.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .any(|e| e.downcast_ref::<MixError>().is_some_and(MixError::is_numerical));
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
