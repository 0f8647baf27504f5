mod bench;
mod config;
mod error;
mod kernel;
mod select;
mod simulate;
mod verify;

use std::panic::{self, AssertUnwindSafe};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use error::{CliError, CliResult};

/// Targeted active-learning selection over region embeddings.
#[derive(Debug, Parser)]
#[command(name = "talisman", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One acquisition round over embedding files.
    Select(select::SelectArgs),
    /// Synthetic active-learning study; writes per-round metrics as CSV.
    Simulate(simulate::SimulateArgs),
    /// Kernel-build and selection timings on synthetic pools.
    Bench(bench::BenchArgs),
    /// Precompute a similarity kernel file.
    Kernel(kernel::KernelArgs),
    /// Run the randomized oracle checks.
    Verify(verify::VerifyArgs),
}

/// Honors `TALISMAN_THREADS` as a cap on the worker pool.
fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("TALISMAN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("TALISMAN_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn run(command: Command) -> CliResult<()> {
    init_threads()?;
    match command {
        Command::Select(a) => select::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Bench(a) => bench::run(a),
        Command::Kernel(a) => kernel::run(a),
        Command::Verify(a) => verify::run(a),
    }
}

fn fail(e: &CliError) -> ! {
    let body = serde_json::json!({ "error": e.name(), "message": e.to_string() });
    eprintln!("{body}");
    std::process::exit(e.exit_code());
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => fail(&CliError::Usage(e.to_string())),
    };
    // a bug must still surface as a structured error, not a bare panic message
    panic::set_hook(Box::new(|_| {}));
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| run(cli.command)));
    match outcome {
        Ok(Ok(())) => {}
        Ok(Err(e)) => fail(&e),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(&CliError::Internal(msg))
        }
    }
}
