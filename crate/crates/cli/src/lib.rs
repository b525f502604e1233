//! Command-line front end: data generation, fitting, evaluation and the
//! scenario simulation harness.

pub mod cli;
pub mod commands;
pub mod replay;
pub mod simulate;

use std::fmt;

use fairclass::FairError;

/// Bad flags, config or input shape.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Replay found stored values that do not reproduce.
#[derive(Debug)]
pub struct ReplayMismatch(pub usize);

impl fmt::Display for ReplayMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} replayed values differ from the results file", self.0)
    }
}

impl std::error::Error for ReplayMismatch {}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

/// Maps an error to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ReplayMismatch>() {
            return EXIT_MISMATCH;
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<FairError>() {
            return match e {
                FairError::Io(_) | FairError::Csv(_) => EXIT_IO,
                _ => EXIT_USAGE,
            };
        }
    }
    EXIT_USAGE
}

pub fn run(cli: cli::Cli) -> anyhow::Result<()> {
    use cli::Command;
    match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::FitPredict(a) => commands::fit_predict(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Simulate(a) => simulate::simulate(a),
        Command::Replay(a) => replay::replay(a),
    }
}
