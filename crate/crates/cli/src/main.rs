use std::path::PathBuf;
use std::process::ExitCode;

use arrowlab_cli::{run_config_file, Command, OUT_ENV};
use clap::Parser;

/// Runs one arrowlab experiment and writes its results with a manifest.
///
/// Exit status: 0 all checks passed, 1 invalid config, 2 numerical
/// failure, 3 an acceptance check failed.
#[derive(Debug, Parser)]
#[command(name = "arrowlab", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON config for the command.
    #[arg(long)]
    config: PathBuf,
    /// Output root; each run gets its own subdirectory.
    #[arg(long, env = OUT_ENV, default_value = "runs")]
    out: PathBuf,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run_config_file(args.command, &args.config, &args.out, args.seed) {
        Ok(outcome) => {
            for c in &outcome.manifest.checks {
                let mark = if c.passed { "pass" } else { "FAIL" };
                println!("{mark}  {}  {:.6e}  ({})", c.name, c.value, c.requirement);
            }
            if let Some(e) = &outcome.error {
                eprintln!("error: {e}");
            }
            println!("{}: {:?}, results in {}", args.command, outcome.manifest.status, outcome.dir.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
