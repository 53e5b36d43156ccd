//! `rfa`: run model comparisons, sweeps and synthetic benchmarks from a TOML
//! config.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure. Log verbosity comes from the `RFA_LOG` environment variable.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rfa_core::pipelines::Family;
use rfa_core::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "rfa", version, about = "Residualized factor adaptation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for the fold x model grid.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated families, overriding the config.
    #[arg(long, value_delimiter = ',')]
    families: Option<Vec<String>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Kbest,
    Factors,
    Fs,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validate the configured families; writes report.json and table.txt.
    Run(Common),
    /// Run a sweep; writes report.json, table.txt and curves.csv.
    Sweep {
        kind: SweepKind,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic benchmark as CSV files plus truth.json and config.toml.
    Synth {
        /// Generator parameters (TOML); defaults to the bench-default benchmark.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value = "synthetic")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit one family on all rows; writes model.json.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "rfa")]
        family: String,
    },
    /// Predict with a saved model; writes predictions.csv.
    Predict {
        /// Saved model.json.
        #[arg(long)]
        model: PathBuf,
        /// Config whose data section names the feature tables.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn parse_families(names: &[String]) -> rfa_core::Result<Vec<Family>> {
    names.iter().map(|n| n.parse()).collect()
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

fn dispatch(cli: Cli) -> rfa_core::Result<()> {
    match cli.command {
        Command::Run(c) => commands::run(&c.load()?, &c.out, c.jobs),
        Command::Sweep { kind, common } => {
            let kind = match kind {
                SweepKind::Kbest => commands::Sweep::Kbest,
                SweepKind::Factors => commands::Sweep::Factors,
                SweepKind::Fs => commands::Sweep::Fs,
            };
            let families = common.families.as_deref().map(parse_families).transpose()?;
            commands::sweep(kind, &common.load()?, families.as_deref(), &common.out, common.jobs)
        }
        Command::Synth { spec, out, seed } => commands::synth(spec.as_deref(), &out, seed),
        Command::Fit { common, family } => commands::fit(&common.load()?, family.parse()?, &common.out),
        Command::Predict { model, config, out } => commands::predict(&model, &config, &out),
    }
}

impl Common {
    fn load(&self) -> rfa_core::Result<rfa_core::config::RunConfig> {
        let mut cfg = rfa_core::config::RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        if let Some(f) = &self.families {
            cfg = cfg.with_families(parse_families(f)?)?;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RFA_LOG", "warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
