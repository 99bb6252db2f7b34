use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mshedge::ingest::{export_market_csv, ingest_real_csv, IngestOptions};
use mshedge::{run_all, run_pipeline, CliError, RunConfig, Stage};

#[derive(Parser)]
#[command(name = "mshedge", version, about = "Multi-scale delta hedging experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; outputs do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample parameters and simulate price/variance paths.
    Simulate(Common),
    /// Price the calls, label optimal periods and build datasets.
    Label(Common),
    /// Train CNN ensembles and baselines for every cutoff.
    Train(Common),
    /// One-vs-rest AUC of every model on held-out paths.
    Evaluate(Common),
    /// Multi-scale backtests and the Final/Std/Under table.
    Backtest(Common),
    /// Reward gaps against risk aversion.
    Sweep(Common),
    /// All stages in order.
    All(Common),
    /// Check a quote file and print the resulting 31-day series.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        strike: f64,
        #[arg(long, default_value_t = 0.0)]
        r: f64,
        /// Keep the last 31 trading rows of a longer file.
        #[arg(long)]
        truncate: bool,
        /// Accept gaps of more than one missing weekday.
        #[arg(long)]
        force: bool,
    },
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(cfg)
}

fn stage(common: &Common, stage: Option<Stage>) -> Result<(), CliError> {
    let cfg = load(common)?;
    match stage {
        Some(s) => run_pipeline(&cfg, s, &common.out),
        None => run_all(&cfg, &common.out),
    }
}

fn ingest(csv: &Path, strike: f64, r: f64, opts: IngestOptions) -> Result<(), CliError> {
    let series = ingest_real_csv(csv, strike, r, opts)?;
    let start = chrono::NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    export_market_csv(std::io::stdout().lock(), &series, start)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => stage(c, Some(Stage::Simulate)),
        Command::Label(c) => stage(c, Some(Stage::Label)),
        Command::Train(c) => stage(c, Some(Stage::Train)),
        Command::Evaluate(c) => stage(c, Some(Stage::Evaluate)),
        Command::Backtest(c) => stage(c, Some(Stage::Backtest)),
        Command::Sweep(c) => stage(c, Some(Stage::Sweep)),
        Command::All(c) => stage(c, None),
        Command::Ingest { csv, strike, r, truncate, force } => {
            ingest(csv, *strike, *r, IngestOptions { truncate: *truncate, force: *force })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mshedge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
