use std::process::ExitCode;

use clap::Parser;
use rpens::Error;

mod args;
mod commands;
mod output;

use args::{Cli, Command, Diagnose};
use output::Audit;

const USAGE: u8 = 2;
const DATA: u8 = 3;
const NUMERICAL: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        return NUMERICAL;
    }
    match e {
        Error::Config(_) | Error::InvalidDimension { .. } => USAGE,
        _ => DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let argv = match args::expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(USAGE);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let audit = Audit::new(&argv[1..]);

    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a, &audit),
        Command::Fit(a) => commands::fit(a, &audit),
        Command::Predict(a) => commands::predict(a, &audit),
        Command::SelectD(a) => commands::select_dimension(a, &audit),
        Command::Diagnose(Diagnose::Rate(a)) => commands::rate(a, &audit),
        Command::Diagnose(Diagnose::Bound(a)) => commands::bound(a),
        Command::BayesRisk(a) => commands::bayes_risk(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
