use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use semifactual::commands::{self, ExplainInput};
use semifactual::report::{csv_row, CSV_HEADER};
use semifactual::{Overrides, Result, RunConfig, ThetaSetting};

/// Semifactual explanations of conformal rejects.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// CSV dataset with a header row.
    #[arg(long, global = true, value_name = "PATH")]
    dataset: Option<PathBuf>,
    /// Name of the label column.
    #[arg(long, global = true, value_name = "COL")]
    label: Option<String>,
    #[arg(long, global = true, value_parser = ["knn", "gnb"])]
    model: Option<String>,
    /// "knee" or a fixed threshold in (0, 1].
    #[arg(long, global = true, value_name = "knee|FLOAT")]
    theta: Option<ThetaSetting>,
    /// Semifactuals per explanation.
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Fill empty cells with the column mean.
    #[arg(long, global = true)]
    impute_missing: bool,
    /// Also report standardized values.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Explain why one input is rejected.
    Explain {
        /// Row of the dataset to explain.
        #[arg(long, conflicts_with = "x", required_unless_present = "x")]
        row: Option<usize>,
        /// Comma-separated feature vector in original units.
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
        /// Add the configured noise before explaining.
        #[arg(long)]
        perturb: bool,
    },
    /// Cross-validated benchmark; writes report.json, report.csv and explanations.jsonl.
    Benchmark,
    /// Per-fold thresholds, rejection rates and credibility histograms.
    Inspect,
}

fn run(cli: Cli) -> Result<()> {
    let c = cli.common;
    let overrides = Overrides {
        dataset: c.dataset,
        label: c.label,
        model: c.model,
        theta: c.theta,
        k: c.k,
        seed: c.seed,
        jobs: c.jobs,
        out: c.out.clone(),
        impute_missing: c.impute_missing,
    };
    let cfg = RunConfig::resolve(c.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Explain { row, x, perturb } => {
            let input = match (row, x) {
                (Some(r), _) => ExplainInput::Row(r),
                (None, Some(v)) => ExplainInput::Vector(commands::parse_vector(&v)?),
                (None, None) => unreachable!("clap requires --row or --x"),
            };
            let record = commands::explain(&cfg, &input, perturb, c.verbose)?;
            let json = serde_json::to_string_pretty(&record)?;
            println!("{json}");
            if let Some(dir) = c.out {
                std::fs::create_dir_all(&dir)
                    .map_err(|source| semifactual::CliError::Io { path: dir.clone(), source })?;
                let path = dir.join("explanation.json");
                std::fs::write(&path, json + "\n").map_err(|source| semifactual::CliError::Io { path, source })?;
            }
        }
        Command::Benchmark => {
            let out = commands::benchmark_to_dir(&cfg, c.verbose)?;
            println!("{}", CSV_HEADER.join("\t"));
            println!("{}", csv_row(&out.dataset, &out.report).join("\t"));
        }
        Command::Inspect => {
            print!("{}", commands::render_inspection(&commands::inspect(&cfg)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
