mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

use args::Cli;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] rotor_codes::Error),
    #[error("{0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use rotor_codes::Error as E;
        match self {
            CliError::Lib(E::Numerical(_) | E::Quadrature(_) | E::Truncation { .. }) => 3,
            CliError::Io(_) => 3,
            _ => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Returns whether the `--check` gate passed (always true without `--check`).
fn run(cli: &Cli) -> Result<bool, CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let report = commands::run(&cli.command, cli.seed)?;
    let bytes = report.render(cli.format.unwrap_or(report.default_format))?;
    output::emit(&bytes, cli.out.as_deref())?;
    if cli.check && !report.check.passed {
        eprintln!("check failed: {}", report.check.detail);
        return Ok(false);
    }
    Ok(true)
}
