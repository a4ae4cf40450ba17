use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mwg_core::concavity::TableConvention;
use mwg_core::experiment::{
    cmd_concavity, cmd_couple, cmd_iact, cmd_map, cmd_sample, cmd_sweep_tau, sweep_csv, ExperimentConfig, InitKind,
    Problem, SamplerKind, CONCAVITY_N,
};
use mwg_core::{Error, Result};

#[derive(Parser)]
#[command(name = "mwg", version, about = "Block-wise Langevin samplers and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Blockwise log-concavity margins over the standard (ell, q) grid.
    Concavity {
        #[arg(long, default_value_t = CONCAVITY_N)]
        n: usize,
        #[arg(long, value_enum, default_value_t = TableConvention::Published)]
        convention: TableConvention,
    },
    /// Run one chain and report acceptance, IACT and cost.
    Sample(RunArgs),
    /// Coupled replicas on the 1D Gaussian and a contraction-rate fit.
    Couple(RunArgs),
    /// Acceptance and IACT over a grid of samplers, block sizes and steps.
    SweepTau(RunArgs),
    /// IACT of a chain CSV.
    Iact {
        path: PathBuf,
        /// Column index; all columns are averaged when omitted.
        #[arg(long)]
        col: Option<usize>,
        #[arg(long, default_value_t = 0)]
        burnin: usize,
    },
    /// MAP point of the configured posterior.
    Map(RunArgs),
}

/// Flags override values read from `--config`.
#[derive(Args, Default)]
struct RunArgs {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    problem: Option<Problem>,
    #[arg(long, value_enum)]
    sampler: Option<SamplerKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    side: Option<usize>,
    #[arg(long)]
    tile: Option<usize>,
    #[arg(long)]
    setup: Option<u32>,
    #[arg(long)]
    n_theta: Option<usize>,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long, value_enum)]
    init: Option<InitKind>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    /// Comma-separated step sizes.
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    /// Comma-separated block sizes (tile sides for cox).
    #[arg(long, value_delimiter = ',')]
    block_sizes: Option<Vec<usize>>,
    #[arg(long, value_enum, value_delimiter = ',')]
    samplers: Option<Vec<SamplerKind>>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

macro_rules! overlay {
    ($cfg:ident, $args:ident, $($f:ident),*) => {
        $(if let Some(v) = $args.$f { $cfg.$f = v; })*
    };
}

impl RunArgs {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let a = self;
        overlay!(
            cfg, a, problem, sampler, n, ell, side, tile, setup, q, tau, beta, steps, thin, burnin, seed, data_seed,
            init, replicas, sweeps, taus, block_sizes, samplers
        );
        if a.n_theta.is_some() {
            cfg.n_theta = a.n_theta;
        }
        if a.fraction.is_some() {
            cfg.fraction = a.fraction;
        }
        if a.output.is_some() {
            cfg.output = a.output;
        }
        if a.cache_dir.is_some() {
            cfg.cache_dir = a.cache_dir;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))?;
    println!("{s}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Concavity { n, convention } => {
            print!("{}", cmd_concavity(n, convention)?);
            Ok(())
        }
        Command::Sample(a) => print_json(&cmd_sample(&a.resolve()?)?),
        Command::Couple(a) => {
            let mut cfg = a.resolve()?;
            if cfg.problem != Problem::Gauss1d {
                cfg.problem = Problem::Gauss1d;
                cfg.validate()?;
            }
            print_json(&cmd_couple(&cfg)?)
        }
        Command::SweepTau(a) => {
            print!("{}", sweep_csv(&cmd_sweep_tau(&a.resolve()?)?));
            Ok(())
        }
        Command::Iact { path, col, burnin } => print_json(&cmd_iact(&path, col, burnin)?),
        Command::Map(a) => print_json(&cmd_map(&a.resolve()?)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mwg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
