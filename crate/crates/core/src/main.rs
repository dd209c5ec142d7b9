//! Command-line experiment runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use airfed::experiment::{parse_config, run_experiment, ExperimentConfig};
use airfed::selection::Method;
use airfed::{Error, Result};

#[derive(Parser)]
#[command(
    name = "airfed",
    version,
    about = "Over-the-air federated learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the method x seed grid described by a config file.
    Run {
        /// Path to a `key = value` config document.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seeds to run (overrides the config's `seeds`).
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Single method to run (overrides the config's `methods`).
        #[arg(long)]
        method: Option<Method>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            seeds,
            method,
        } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::from(e).with_context(format!("reading {}", config.display())))?;
            let config: ExperimentConfig =
                parse_config(&text)?.with_overrides(out, seeds, method)?;
            let summary = run_experiment(&config)?;
            let jobs = config.methods.len() * config.seeds.len();
            println!(
                "wrote {jobs} trace file(s) and summary.json to {}",
                config.output_dir.display()
            );
            for (name, m) in &summary.methods {
                let last = m.rounds.last().expect("at least one round");
                println!(
                    "  {name}: final accuracy {:.4} +- {:.4}, mean selected {:.1}, solver {:.1} ms",
                    last.test_accuracy_mean,
                    last.test_accuracy_ci95,
                    m.mean_selected,
                    m.mean_solver_wall_ms
                );
            }
            Ok(())
        }
    }
}
