//! `irisgraph` command-line front end.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Exit status for failures inside the pipeline.
const EXIT_PIPELINE: u8 = 1;
/// Exit status for bad flags, values or configuration files.
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let mut message = err.to_string();
            for cause in err.chain().skip(1) {
                let cause = cause.to_string();
                if !message.contains(&cause) {
                    message = format!("{message}: {cause}");
                }
            }
            eprintln!("error: {message}");
            let usage = err
                .downcast_ref::<irisgraph::Error>()
                .is_some_and(|e| matches!(e, irisgraph::Error::Config(_)))
                || err.downcast_ref::<commands::UsageError>().is_some();
            ExitCode::from(if usage { EXIT_USAGE } else { EXIT_PIPELINE })
        }
    }
}
