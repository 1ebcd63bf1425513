mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message: Vec<String> = e
                .to_string()
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with("For more information") && !l.starts_with("Usage:"))
                .map(|l| l.trim_start_matches("error: ").to_string())
                .collect();
            return report(&CliError::Usage(message.join(" ")));
        }
    };
    if let Err(e) = configure_threads() {
        return report(&e);
    }
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Finetune(a) => commands::finetune(a),
        Command::Clusters(a) => commands::clusters(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("KERNET_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .map_err(|_| CliError::Usage(format!("KERNET_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("KERNET_THREADS: {e}")))
}

fn report(e: &CliError) -> ExitCode {
    let (kind, code) = match e {
        CliError::Usage(_) => ("usage", 3),
        CliError::Data(_) => ("data", 2),
    };
    let line = serde_json::json!({ "error": e.message(), "kind": kind, "exit_code": code });
    eprintln!("{line}");
    ExitCode::from(code)
}
