use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cncfl::cli::{self, RunOptions};

#[derive(Parser)]
#[command(
    name = "cncfl",
    about = "Deterministic federated-learning simulator: compute-tiered scheduling, \
resource-block assignment, and peer-to-peer chain training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Preset name (Pr1..Pr6).
    #[arg(long)]
    preset: Option<String>,
    /// Config file of key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Extra KEY=VALUE overrides, applied last (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory for CSV, manifest, and SVG artifacts.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its metrics CSV.
    Run {
        #[command(flatten)]
        common: ConfigArgs,
        /// Strategy to run.
        #[arg(long)]
        strategy: Option<String>,
        /// Print one log line per round.
        #[arg(long)]
        verbose: bool,
    },
    /// Run several strategies under one seed; emit a long-format CSV.
    Compare {
        #[command(flatten)]
        common: ConfigArgs,
        /// Comma-separated strategy list (at least two).
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<String>,
    },
    /// Sweep the solvers against their oracles; non-zero exit on mismatch.
    OracleCheck {
        /// Matrix sizes to sweep (each within the brute-force guard of 9).
        #[arg(long, value_delimiter = ',', default_value = "6,5")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Render an SVG line plot from a metrics CSV.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        /// X-axis field name.
        #[arg(long)]
        x: String,
        /// Y-axis field name.
        #[arg(long)]
        y: String,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run_options(common: ConfigArgs, strategy: Option<String>) -> RunOptions {
    RunOptions {
        preset: common.preset,
        config_path: common.config,
        strategy,
        seed: common.seed,
        overrides: common.set,
        out_dir: common.out_dir,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { common, strategy, verbose } => {
            let opts = run_options(common, strategy);
            cli::cmd_run(&opts).map(|summary| {
                if verbose {
                    if let Ok(text) = std::fs::read_to_string(&summary.csv_path) {
                        for line in text.lines().skip(1) {
                            eprintln!("round {line}");
                        }
                    }
                }
                println!("{}", summary.line());
            })
        }
        Command::Compare { common, strategies } => {
            let opts = run_options(common, None);
            cli::cmd_compare(&opts, &strategies).map(|summary| {
                for (strategy, acc) in &summary.finals {
                    println!(
                        "{strategy}: final_accuracy={}",
                        cli::report::format_float(*acc)
                    );
                }
                println!("csv={}", summary.csv_path.display());
            })
        }
        Command::OracleCheck { sizes, trials, seed } => {
            match cli::cmd_oracle_check(&sizes, trials, seed) {
                Ok(report) => {
                    print!("{}", report.render());
                    if report.all_passed() {
                        Ok(())
                    } else {
                        Err(cncfl::Error::InvalidInput("oracle mismatch".into()))
                    }
                }
                Err(e) => Err(e),
            }
        }
        Command::Plot { csv, x, y, out } => cli::cmd_plot(&csv, &x, &y, &out).map(|empty| {
            if empty {
                eprintln!("warning: CSV body is empty; wrote axes only");
            }
            println!("svg={}", out.display());
        }),
    };

    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
