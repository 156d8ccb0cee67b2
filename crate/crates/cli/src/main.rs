use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use htlcflood_cli::{run_scenario, validate_scenario, RunOptions, EXIT_CONFIG};

#[derive(Parser)]
#[command(
    name = "htlcflood",
    version,
    about = "Run mass HTLC force-close theft scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for sweeps.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Check a scenario file and its inputs without running it.
    Validate { scenario: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            jobs,
        } => match run_scenario(&scenario, &out, RunOptions { seed, jobs }) {
            Ok(summary) => {
                // A closed stdout must not turn a finished run into a failure.
                let mut stdout = io::stdout().lock();
                for line in &summary.lines {
                    let _ = writeln!(stdout, "{line}");
                }
                let _ = writeln!(stdout, "artifacts written to {}", out.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error [{}]: {e}", e.stage());
                ExitCode::from(e.exit_code())
            }
        },
        Command::Validate { scenario } => match validate_scenario(&scenario) {
            Ok(s) => {
                let _ = writeln!(
                    io::stdout(),
                    "ok: {} scenario, seed {}",
                    s.kind.name(),
                    s.seed
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error [{}]: {e}", e.stage());
                ExitCode::from(e.exit_code())
            }
        },
    }
}
