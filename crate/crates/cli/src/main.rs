//! `masterop`: evaluate the fully fractional heat operator and run the
//! counterexample, defect and verification experiments.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 usage or parse
//! error, 3 numeric failure.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CounterexampleArgs, DefectArgs, EvalArgs, VerifyArgs};
use config::GlobalArgs;

const GRAMMAR: &str = "\
Expressions: numbers, x1 x2 x3 t, + - * / and ^ with a literal exponent,
parentheses, exp cos sin abs pos sqrt bump (one argument each), and the
families phi(j, alpha, beta), psi(j, alpha, beta), w(j, gamma).
Precedence: ^ binds tighter than unary minus, then * /, then + -.
Example: \"exp(-t)*cos(x1) + pos(t)^2\"";

#[derive(Debug, Parser)]
#[command(name = "masterop", version, about = "Fully fractional heat operator experiments", after_help = GRAMMAR)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate an operator on an expression at one point.
    Eval(EvalArgs),
    /// Operator values along one of the three defect families.
    Counterexample(CounterexampleArgs),
    /// Tail functional on a (j, R, probe) grid and the defect estimate.
    Defect(DefectArgs),
    /// Partition, kernel-ratio, decay and reduction checks.
    Verify(VerifyArgs),
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
    Core(masterop::Error),
    ChecksFailed,
}

impl From<masterop::Error> for CliError {
    fn from(e: masterop::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numeric(format!("i/o error: {e}"))
    }
}

impl CliError {
    fn code(&self) -> u8 {
        use masterop::Error as E;
        match self {
            CliError::ChecksFailed => 1,
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Core(e) => match e {
                E::Domain(_)
                | E::Syntax { .. }
                | E::Validation(_)
                | E::Constraint(_)
                | E::Unsupported(_)
                | E::HorizonRequired(_) => 2,
                E::Numeric { .. } | E::Integrability(_) => 3,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
            CliError::ChecksFailed => "one or more checks failed".into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Eval(a) => commands::eval(a, &cli.global),
        Command::Counterexample(a) => commands::counterexample(a, &cli.global),
        Command::Defect(a) => commands::defect(a, &cli.global),
        Command::Verify(a) => commands::verify(a, &cli.global),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("masterop: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
