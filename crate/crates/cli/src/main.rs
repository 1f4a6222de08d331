mod args;
mod commands;
mod output;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use pickfreeze::{Error, Result};

use args::{Cli, Command};

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start the worker pool: {e}")))?;
    }
    let table = match &cli.command {
        Command::Estimate(a) => commands::estimate(a)?,
        Command::Test(a) => commands::test(a)?,
        Command::Power(a) => commands::power(a)?,
        Command::Concentration(a) => commands::concentration(a)?,
        Command::Berry(a) => commands::berry(a)?,
    };
    let common = cli.command.common();
    let echo = serde_json::to_value(&cli.command).map_err(|e| Error::Config(e.to_string()))?;
    let bytes = output::render(&table, common.format, common.seed, &echo)?;
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &bytes),
        None => std::io::stdout().lock().write_all(&bytes),
    };
    written.map_err(|e| Error::Config(format!("cannot write output: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
