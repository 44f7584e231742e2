use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod output;

use args::Cli;

/// Exit status contract: 0 success, 2 bad input, 3 environment problem
/// (a file that cannot be opened, read or written).
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Env(anyhow::Error),
}

impl Failure {
    pub fn input(e: impl Into<anyhow::Error>) -> Self {
        Failure::Input(e.into())
    }

    pub fn env(e: impl Into<anyhow::Error>) -> Self {
        Failure::Env(e.into())
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Env(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Input(e) | Failure::Env(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
