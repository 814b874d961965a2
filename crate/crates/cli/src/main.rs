use std::path::PathBuf;
use std::process::ExitCode;

use albird_cli::commands::{self, IMPROVEMENT_FILE};
use albird_cli::CliError;
use albird_core::Strategy;
use clap::{Parser, Subcommand};

/// Pool-based active learning benchmarks over precomputed embeddings.
#[derive(Parser)]
#[command(name = "albird", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a dataset directory and print its shape, day histogram and no-bird count.
    Validate { dir: PathBuf },
    /// Generate a synthetic Gaussian-cluster dataset.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment and write curves.csv, improvement.csv and config_echo.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Concurrent (strategy, repetition) runs; results do not depend on it.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Recompute improvement curves from curves.csv, optionally as SVG plots.
    Report {
        #[arg(long)]
        curves: PathBuf,
        #[arg(long, default_value = "random")]
        baseline: Strategy,
        /// Output path; defaults to improvement.csv next to the curves file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { dir } => commands::validate(&dir, &mut std::io::stdout().lock()),
        Command::Synth { config, seed, out } => {
            commands::synth(&config, seed, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Run { config, out, jobs } => {
            let report = commands::run(&config, &out, jobs.max(1))?;
            println!(
                "{} runs in {:.1}s; wrote {} and {}",
                report.runs,
                report.wall_clock_seconds,
                report.curves_csv.display(),
                report.improvement_csv.display()
            );
            Ok(())
        }
        Command::Report {
            curves,
            baseline,
            out,
            svg,
        } => {
            let out = out.unwrap_or_else(|| curves.with_file_name(IMPROVEMENT_FILE));
            for path in commands::report(&curves, baseline, &out, svg.as_deref())? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
