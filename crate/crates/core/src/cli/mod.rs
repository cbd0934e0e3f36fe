//! The `zhang` command line: `stabilize`, `finite-run`, `couple`, `infinite`
//! and `sweep`.
//!
//! Every output starts with a line echoing the full [`ExperimentSpec`];
//! [`ExperimentSpec::parse_echo`] reads it back. Exit codes: 0 on success,
//! 1 for bad parameters or input, 2 when a model invariant fails.

pub mod args;
pub mod commands;
pub mod spec;

use std::io::Write;
use std::time::Instant;

use clap::Parser;

pub use args::Cli;
pub use commands::{
    cmd_couple, cmd_finite_run, cmd_infinite, cmd_stabilize, cmd_sweep, execute, StabilizeReport,
};
pub use spec::{
    CoupleSpec, ExperimentSpec, FiniteRunSpec, InfiniteSpec, OutputFormat, StabilizeSpec, SweepSpec,
};

use crate::error::{Result, SandpileError};

/// Parse `argv`, run the command and return the process exit code.
/// Diagnostics and wall-clock time go to standard error.
pub fn run<I: IntoIterator<Item = String>>(argv: I) -> i32 {
    let argv = match args::expand_config(argv.into_iter().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let start = Instant::now();
    match run_command(cli) {
        Ok(()) => {
            eprintln!("elapsed {:.3}s", start.elapsed().as_secs_f64());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_command(cli: Cli) -> Result<()> {
    let (spec, out, snapshots) = cli.command.into_spec()?;
    match out {
        Some(path) => {
            // Buffer so that a failed run leaves no half-written file behind.
            let mut buf = Vec::new();
            execute(&spec, &mut buf, snapshots.as_deref())?;
            std::fs::write(&path, buf).map_err(|e| {
                SandpileError::Parse(format!("cannot write `{}`: {e}", path.display()))
            })
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            execute(&spec, &mut lock, snapshots.as_deref())?;
            lock.flush()?;
            Ok(())
        }
    }
}
