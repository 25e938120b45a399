//! `margquant`: estimation, limiting variance, condition probes, Monte
//! Carlo experiments and counterexamples for means of functions of
//! marginal order statistics.
//!
//! Exit status: 0 success, 2 configuration or parse error, 3 evaluation
//! error, 4 numerical divergence.

mod commands;
mod config;
mod data;
mod error;
mod pool;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::{CounterexampleArgs, EstimateArgs, Output};
use crate::error::{CliError, CliResult};
use crate::pool::Pool;

#[derive(Parser)]
#[command(
    name = "margquant",
    version,
    about = "Means of functions of marginal order statistics"
)]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for the result files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// The statistic for a CSV sample.
    Estimate {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Registry id or expression.
        #[arg(long)]
        function: Option<String>,
        /// Margins as a JSON array or a path to one.
        #[arg(long)]
        margins: Option<String>,
    },
    /// Limiting variance (or covariance matrix) by quadrature.
    Variance,
    /// Monte Carlo check of the limit theorems.
    Mc,
    /// Numerical probe of a regularity condition.
    Probe,
    /// Reproduce a counterexample (c1 or c2).
    Counterexample {
        name: Option<String>,
        /// Sample sizes; repeat the flag for several.
        #[arg(long = "n")]
        n: Vec<usize>,
        /// Number of seeds per sample size.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Rearrangement bounds for a two-column sample with broken pairing.
    Bounds {
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Estimate { .. } => "estimate",
            Command::Variance => "variance",
            Command::Mc => "mc",
            Command::Probe => "probe",
            Command::Counterexample { .. } => "counterexample",
            Command::Bounds { .. } => "bounds",
        }
    }
}

fn prepare_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(path, e))
}

fn run(cli: Cli) -> CliResult<()> {
    let started = Instant::now();
    let pool = Pool::new(cli.threads).map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let config = cli.config.as_deref();
    if let Some(dir) = &cli.out {
        prepare_dir(dir)?;
    }
    let name = cli.command.name();
    let (output, out_dir): (Output, Option<PathBuf>) = match cli.command {
        Command::Estimate {
            data,
            function,
            margins,
        } => (
            commands::estimate(
                config,
                EstimateArgs {
                    data,
                    function,
                    margins,
                },
            )?,
            cli.out.clone(),
        ),
        Command::Variance => (commands::variance(config, &pool)?, cli.out.clone()),
        Command::Mc => {
            let (o, dir) = commands::mc(config, cli.seed, cli.out.as_deref(), &pool)?;
            (o, dir)
        }
        Command::Probe => (commands::probe(config)?, cli.out.clone()),
        Command::Counterexample { name, n, seeds } => (
            commands::counterexample(
                config,
                CounterexampleArgs { name, n, seeds },
                cli.seed,
                &pool,
            )?,
            cli.out.clone(),
        ),
        Command::Bounds { data } => (commands::bounds(config, data)?, cli.out.clone()),
    };

    match cli.format {
        Format::Json => print!("{}", commands::pretty(&output.json)),
        Format::Csv => print!("{}", output.table.render()),
    }
    if let Some(dir) = out_dir {
        prepare_dir(&dir)?;
        if output.files.is_empty() {
            write(
                &dir,
                &format!("{name}.json"),
                &commands::pretty(&output.json),
            )?;
        }
        for (file, contents) in &output.files {
            write(&dir, file, contents)?;
        }
        let meta = serde_json::json!({
            "command": name,
            "version": env!("CARGO_PKG_VERSION"),
            "threads": pool.threads(),
            "elapsed_seconds": started.elapsed().as_secs_f64(),
        });
        write(&dir, "meta.json", &commands::pretty(&meta))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Core(margquant_core::Error::Divergence { trace, .. }) = &e {
                eprintln!("trace: {trace:?}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
