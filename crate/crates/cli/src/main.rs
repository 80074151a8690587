use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use byrd_cli::config::RunConfig;
use byrd_cli::{run, summarize};

#[derive(Parser)]
#[command(name = "byrd", version, about = "Byzantine-resilient federated optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every algorithm/aggregator/attack cell of a config.
    Run {
        config: PathBuf,
        /// Output directory for CSVs, manifest.json and bounds.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize metrics CSVs matching a glob pattern.
    Summarize {
        pattern: String,
        /// Optimality gap used for rounds-to-threshold.
        #[arg(long, default_value_t = 1e-3)]
        threshold: f64,
    },
    /// Print problem constants and convergence bounds for a config.
    Bounds { config: PathBuf },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, out } => {
            let (cfg, text) = RunConfig::load(&config)?;
            let summary = run::run(&cfg, &text, &out)?;
            println!(
                "wrote {} runs to {}",
                summary.manifest.outputs.len(),
                out.display()
            );
            if summary.diverged.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("diverged: {}", summary.diverged.join(", "));
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Summarize { pattern, threshold } => {
            println!("{}", summarize::SUMMARY_HEADER);
            for s in summarize::summarize(&pattern, threshold)? {
                println!("{}", s.csv_row());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Bounds { config } => {
            let (cfg, _) = RunConfig::load(&config)?;
            print!("{}", run::bounds(&cfg)?.to_csv());
            Ok(ExitCode::SUCCESS)
        }
    }
}
