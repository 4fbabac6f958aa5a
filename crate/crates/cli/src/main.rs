use std::process::ExitCode;

use clap::Parser;
use ergodic_cli::{execute, Cli, LOG_ENV};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command, &cli.opts) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                log::warn!("{w}");
            }
            println!("{}", outcome.csv.display());
            if outcome.failed {
                eprintln!("{}: some points or checks failed; see {}", outcome.command, outcome.sidecar.display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
