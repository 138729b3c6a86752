//! `dkseq`: generate digital Kronecker points, measure their discrepancy
//! and run the metrical experiments.
//!
//! Exit status: 0 on success, 1 when a checked property fails, 2 on usage
//! or configuration errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "dkseq", version, about = "Digital Kronecker sequences: points, discrepancy, metrical checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: GlobalOpts,
}

#[derive(Args, Clone)]
pub struct GlobalOpts {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice (overrides seeds in the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Cap on grid cells or digit prefixes touched by exact evaluations.
    #[arg(long = "budget-grid", global = true, default_value_t = 1 << 26)]
    pub budget_grid: u128,
    /// Monte Carlo sample count.
    #[arg(long = "budget-samples", global = true, default_value_t = 100_000)]
    pub budget_samples: u64,
    /// Largest total degree scanned.
    #[arg(long = "R", global = true)]
    pub r_max: Option<u32>,
    /// Truncation parameter of the admissible set.
    #[arg(long = "J", global = true)]
    pub j_trunc: Option<u32>,
    /// Digit resolution.
    #[arg(long = "m", global = true)]
    pub m: Option<usize>,
    /// Number of points.
    #[arg(long = "N", global = true)]
    pub n: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Brute,
    Walsh,
    Both,
}

#[derive(Subcommand)]
pub enum Command {
    /// Write the first N points with their digits.
    Generate,
    /// Star discrepancy of the first N points.
    Discrepancy {
        #[arg(long, value_enum, default_value_t = MethodArg::Brute)]
        method: MethodArg,
        /// Digit pairing inside the spectral G factor.
        #[arg(long, hide = true)]
        pairing: Option<String>,
    },
    /// Product, additive, orthonormality and mean-zero checks of Walsh functions.
    WalshCheck,
    /// Haar measure of a valuation event.
    Measure,
    /// Scan the admissible set for discrepancy witnesses.
    Witness,
    /// Quasi-Monte Carlo integration error table.
    Integrate {
        /// One of const, linear, exp, cos (overrides the config).
        #[arg(long)]
        integrand: Option<String>,
    },
    /// Run the acceptance criteria.
    Suite {
        /// Run only these criteria.
        #[arg(long)]
        only: Vec<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
