use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scorebucket::config::{parse_strategies, parse_window_sizes, ConfigError};
use scorebucket::pipeline::{self, Inputs};
use scorebucket::report::read_tests_csv;
use scorebucket::synthetic::{generate, SyntheticSpec};
use scorebucket::{load_return_panel, load_scores, Error, RunConfig};

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "SCOREBUCKET_THREADS";

#[derive(Parser)]
#[command(name = "scorebucket", version, about = "Score-bucketed portfolio backtests with bootstrap performance tests")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key = value config file
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Comma-separated window sizes, e.g. 430,250,170,84
    #[arg(long, global = true)]
    ws: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Comma-separated strategies: MV, EW, MC
    #[arg(long, global = true)]
    strategy: Option<String>,
    #[arg(long, global = true)]
    returns: Option<PathBuf>,
    #[arg(long, global = true)]
    scores: Option<PathBuf>,
    #[arg(long, global = true)]
    caps: Option<PathBuf>,
    /// Number of positive-score buckets
    #[arg(long, global = true)]
    k: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Descriptive statistics of the return panel and scores
    Describe,
    /// Assign assets to score buckets
    Bucket,
    /// Run the rolling-window backtests and write oos/wealth series
    Backtest {
        /// Also write the daily weight path of every pair
        #[arg(long)]
        dump_weights: bool,
    },
    /// Bootstrap tests of every bucket against bucket 1 (reads backtest output)
    Test,
    /// Metrics tables and wealth plots (reads backtest and test output)
    Report,
    /// Full pipeline
    All,
    /// Write a synthetic dataset (returns.csv, caps.csv, scores.csv)
    Synth {
        #[arg(long, default_value_t = 800)]
        dates: usize,
        #[arg(long, default_value_t = 100)]
        assets: usize,
        #[arg(long, default_value_t = 15)]
        zero_score: usize,
        /// Idiosyncratic volatility decay with score (0 = no score effect)
        #[arg(long, default_value_t = 0.0)]
        score_decay: f64,
    },
}

fn build_config(common: &Common) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(ws) = &common.ws {
        cfg.window_sizes = parse_window_sizes(ws)?;
    }
    if let Some(s) = &common.strategy {
        cfg.strategies = parse_strategies(s)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    if let Some(d) = &common.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(p) = &common.returns {
        cfg.returns = Some(p.clone());
    }
    if let Some(p) = &common.scores {
        cfg.scores = Some(p.clone());
    }
    if let Some(p) = &common.caps {
        cfg.caps = Some(p.clone());
    }
    if let Some(k) = common.k {
        cfg.set("k", &k.to_string(), std::path::Path::new(""))?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = build_config(&cli.common)?;
    match cli.command {
        Command::Describe => {
            let returns = load_return_panel(cfg.returns_path()?)?;
            let scores = match &cfg.scores {
                Some(p) => Some(load_scores(p, &returns)?),
                None => None,
            };
            let path = pipeline::stage_describe(&cfg, &returns, scores.as_ref())?;
            print!("{}", std::fs::read_to_string(&path).unwrap_or_default());
        }
        Command::Bucket => {
            let returns = load_return_panel(cfg.returns_path()?)?;
            let scores = load_scores(cfg.scores_path()?, &returns)?;
            let (buckets, _) = pipeline::stage_bucket(&cfg, &scores)?;
            for b in &buckets.buckets {
                println!("PT {}: {} assets", b.id, b.len());
            }
        }
        Command::Backtest { dump_weights } => {
            cfg.dump_weights |= dump_weights;
            let inputs: Inputs = pipeline::load_inputs(&cfg)?;
            cfg.check_windows(inputs.returns.n_dates())?;
            let (buckets, _) = pipeline::stage_bucket(&cfg, &inputs.scores)?;
            for &ws in &cfg.window_sizes {
                let (result, _, _) = pipeline::stage_backtest(&cfg, &inputs, &buckets, ws)?;
                println!(
                    "ws={ws}: M={} for {} (bucket, strategy) pairs, {} capped solves",
                    result.m,
                    result.pairs.len(),
                    result.non_converged_days()
                );
            }
        }
        Command::Test => {
            cfg.seed()?;
            for &ws in &cfg.window_sizes {
                let oos = pipeline::read_oos(&cfg, ws)?;
                let (_, path) = pipeline::stage_tests(&cfg, ws, &oos)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Report => {
            let returns = load_return_panel(cfg.returns_path()?)?;
            let scores = load_scores(cfg.scores_path()?, &returns)?;
            let buckets = scorebucket::assign_buckets(&scores, cfg.k, cfg.allow_empty_pt1)?;
            for &ws in &cfg.window_sizes {
                let oos = pipeline::read_oos(&cfg, ws)?;
                let tests_file = pipeline::tests_path(&cfg.out_dir, ws);
                let tests = if tests_file.exists() { read_tests_csv(&tests_file)? } else { BTreeMap::new() };
                let (table, _) = pipeline::stage_report(&cfg, ws, &buckets, &oos, &tests)?;
                print!("{}", table.to_text());
            }
        }
        Command::All => {
            let (files, tables) = pipeline::run_pipeline(&cfg)?;
            for table in tables.values() {
                print!("{}", table.to_text());
            }
            log::info!("wrote {} files to {}", files.len(), cfg.out_dir.display());
        }
        Command::Synth { dates, assets, zero_score, score_decay } => {
            let spec = SyntheticSpec {
                n_dates: dates,
                n_assets: assets,
                n_zero_score: zero_score,
                seed: cfg.seed.unwrap_or(SyntheticSpec::default().seed),
                idio_score_decay: score_decay,
                ..SyntheticSpec::default()
            };
            let data = generate(&spec);
            let out = pipeline::ensure_out_dir(&cfg)?;
            data.returns.write_csv(&out.join("returns.csv"))?;
            data.caps.write_csv(&out.join("caps.csv"))?;
            data.scores.write_csv(&out.join("scores.csv"))?;
            println!("wrote returns.csv, caps.csv, scores.csv to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size thread pool: {e}");
                }
            }
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got '{v}'");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
