mod args;
mod colormap;
mod commands;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};
use log::LevelFilter;

use args::{Cli, Command};

fn init_logging() {
    let level = match std::env::var("DASR_LOG").as_deref() {
        Ok("quiet") => LevelFilter::Error,
        Ok("debug") => LevelFilter::Debug,
        _ => LevelFilter::Info,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .init();
}

fn main() -> ExitCode {
    init_logging();
    // Parse errors exit with status 2; --help and --version with 0.
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Degrade(a) => commands::degrade(a),
        Command::Train(a) => {
            let sub = matches.subcommand_matches("train").expect("train subcommand");
            commands::train(a, sub)
        }
        Command::Eval(a) => commands::eval(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::Sobel(a) => commands::sobel(a),
        Command::Residual(a) => commands::residual(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
