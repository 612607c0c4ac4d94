mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};
use mknn_core::MknnError;

use crate::args::{Cli, Command};

/// Bad flags or configuration, reported with exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    let cmd = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    let argv = match config::expand(std::env::args_os().collect(), &cmd) {
        Ok(a) => a,
        Err(e) => return fail(&e),
    };
    let matches = match cmd.try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Err(e) = init_threads() {
        return fail(&e);
    }
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Online(a) => commands::online(&a),
        Command::Rmse(a) => commands::rmse(&a),
        Command::Tune(a) => commands::tune(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

/// Sizes the worker pool from `MKNN_THREADS` when set.
fn init_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("MKNN_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        UsageError(format!(
            "MKNN_THREADS must be a positive integer, got `{v}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

fn fail(e: &anyhow::Error) -> ExitCode {
    eprintln!("error: {e:#}");
    ExitCode::from(exit_code(e))
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(m) = cause.downcast_ref::<MknnError>() {
            return match m {
                _ if m.is_numerical() => EXIT_NUMERICAL,
                MknnError::InvalidParameter { .. }
                | MknnError::KExceedsLabeled { .. }
                | MknnError::EmptyGrid
                | MknnError::UnknownKind(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_DATA
}
