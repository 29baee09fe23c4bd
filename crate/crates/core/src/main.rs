use std::path::PathBuf;
use std::process::ExitCode;

use anderson_lab::harness::{run_experiment, ExperimentConfig, Slice};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "anderson-lab", version, about = "Monte Carlo spectral experiments for random Schrödinger operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and persist the integrated density of states table.
    IdsBuild(Common),
    /// Bulk point process: Poisson counts, spacings, intensity.
    BulkStats(Common),
    /// Edge point process and the Lifshitz exponent.
    EdgeStats(Common),
    /// Wegner, Minami, higher-order moment and finite-volume checks.
    WegnerMinami(Common),
    /// Box reduction: matching, localization and single-box probabilities.
    Reduce(Common),
    /// Eigenvalue counting fluctuations.
    Clt(Common),
    /// Spacing distribution over a wide window.
    Spacings(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides both the config file and the environment variable.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (slice, common) = match cli.command {
        Command::IdsBuild(c) => (Slice::IdsBuild, c),
        Command::BulkStats(c) => (Slice::BulkStats, c),
        Command::EdgeStats(c) => (Slice::EdgeStats, c),
        Command::WegnerMinami(c) => (Slice::WegnerMinami, c),
        Command::Reduce(c) => (Slice::Reduce, c),
        Command::Clt(c) => (Slice::Clt, c),
        Command::Spacings(c) => (Slice::Spacings, c),
    };
    match execute(slice, common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(slice: Slice, common: Common) -> anderson_lab::Result<bool> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(threads) = common.threads {
        cfg.threads = threads;
    }
    let out = common.out.unwrap_or_else(|| cfg.resolved_output_dir());
    let outcome = run_experiment(&cfg, &[slice], &out)?;
    for r in &outcome.reports {
        println!("{} {} statistic={:.6e} threshold={:.6e} n={}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.statistic, r.threshold, r.sample_size);
    }
    println!("output: {}", outcome.output_dir.display());
    Ok(outcome.passed())
}
