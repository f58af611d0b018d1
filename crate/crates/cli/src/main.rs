//! Command line front end: combinatorial statistics, bound verification,
//! the coupled Gaussian example and the DNLS demo.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "wickc", version, about = "Cumulant clustering bounds, verified numerically")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// TOML or JSON configuration file.
    #[arg(long, global = true, env = "WICKC_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "WICKC_OUT", default_value = "wickc-out")]
    pub out: PathBuf,
    #[arg(long, global = true, env = "WICKC_SEED")]
    pub seed: Option<u64>,
    /// Largest cumulant order: `2n` for partition-stats and verify-bounds.
    #[arg(long, global = true, env = "WICKC_MAX_ORDER")]
    pub max_order: Option<usize>,
    /// Shrinks every right-hand side by 1e-6 to exercise the failure path.
    #[arg(long, global = true, hide = true, env = "WICKC_CORRUPT_RHS")]
    pub corrupt_rhs: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sum of prod |S|! over partitions of 2n points against (2n)! e^{2n}.
    PartitionStats,
    /// Clustering bounds over a matrix of fields, orders and exponents.
    VerifyBounds,
    /// Partial sums of the coupled white-noise example and its PSD check.
    ExampleGaussian,
    /// Duhamel residuals of the lattice DNLS time correlation.
    DnlsDemo,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::PartitionStats => commands::partition_stats(&cli.common),
        Command::VerifyBounds => commands::verify_bounds(&cli.common),
        Command::ExampleGaussian => commands::example_gaussian(&cli.common),
        Command::DnlsDemo => commands::dnls_demo(&cli.common),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some flags are false; see {}", cli.common.out.join(manifest::MANIFEST_NAME).display());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
