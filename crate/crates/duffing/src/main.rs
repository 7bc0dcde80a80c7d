use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use duffing::commands::{run, Command, Common};
use duffing::grid::SeedGrid;
use duffing_core::analysis::DiophantineParams;

/// Impulsive Duffing toolkit: simulation, twist profiles and section-map analyses.
#[derive(Debug, Parser)]
#[command(name = "duffing", version)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// System configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "./out")]
    out: PathBuf,
    /// Seeds, e.g. `lambda=1:100:log:20,theta=0:1:8`.
    #[arg(long, global = true)]
    seed_grid: Option<SeedGrid>,
    /// Worker threads (default: all logical processors).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Integrator tolerance, overriding the config.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Directory for the special-function cache.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Integrate trajectories from every seed.
    Simulate {
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
    },
    /// One-period angle advance and its derivative over an action grid.
    Twist {
        #[arg(long, default_value_t = 1e2)]
        lambda_min: f64,
        #[arg(long, default_value_t = 1e4)]
        lambda_max: f64,
        #[arg(long, default_value_t = 21)]
        points: usize,
        /// Start angles averaged per action.
        #[arg(long, default_value_t = 8)]
        angles: usize,
    },
    /// Section-map analyses over the seed grid.
    Analyze {
        #[command(subcommand)]
        what: Analysis,
    },
    /// Dump the sampled (C, S) pair, the period and the chart constants.
    Special {
        #[arg(long)]
        n: Option<u32>,
    },
}

#[derive(Debug, Subcommand)]
enum Analysis {
    /// Weighted Birkhoff rotation number of each seed's orbit.
    Rotation {
        #[arg(long, default_value_t = 2000)]
        iterates: usize,
    },
    /// Fit and certify an invariant curve through each seed.
    Curve {
        #[arg(long, default_value_t = 24)]
        modes: usize,
        #[arg(long, default_value_t = 2000)]
        iterates: usize,
        #[arg(long, default_value_t = 1e-2)]
        diophantine_c: f64,
        #[arg(long, default_value_t = 0.5)]
        diophantine_beta: f64,
        #[arg(long, default_value_t = 10_000)]
        q_max: u64,
        /// Acceptance threshold as a multiple of the median action.
        #[arg(long, default_value_t = 1e-6)]
        threshold_factor: f64,
        /// Largest admissible angle gap, in units of 1/iterates.
        #[arg(long, default_value_t = 3.0)]
        gap_factor: f64,
    },
    /// Long-horizon boundedness scan, optionally between two curves.
    Bounded {
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
        /// Actions `LO:HI` (at angle 0) seeding two bracketing curves.
        #[arg(long, value_parser = parse_bracket)]
        bracket: Option<(f64, f64)>,
    },
    /// Newton search for (period, winding) periodic orbits from the seeds.
    Periodic {
        #[arg(long)]
        period: usize,
        #[arg(long, allow_hyphen_values = true)]
        winding: i64,
    },
}

fn parse_bracket(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: f64 = a.parse().map_err(|_| format!("bad number {a:?}"))?;
    let hi: f64 = b.parse().map_err(|_| format!("bad number {b:?}"))?;
    if !(lo > 0.0 && hi > lo) {
        return Err("need 0 < LO < HI".into());
    }
    Ok((lo, hi))
}

fn main() {
    let cli = Cli::parse();
    let c = cli.common;
    let common = Common {
        config: c.config,
        out: c.out,
        seed_grid: c.seed_grid.unwrap_or_default(),
        jobs: c.jobs,
        tol: c.tol,
        cache: c.cache,
    };
    let command = match cli.command {
        Cmd::Simulate { t_end } => Command::Simulate { t_end },
        Cmd::Twist { lambda_min, lambda_max, points, angles } => {
            Command::Twist { lambda_min, lambda_max, points, angles }
        }
        Cmd::Special { n } => Command::Special { n },
        Cmd::Analyze { what } => match what {
            Analysis::Rotation { iterates } => Command::Rotation { iterates },
            Analysis::Curve { modes, iterates, diophantine_c, diophantine_beta, q_max, threshold_factor, gap_factor } => {
                Command::Curve {
                    modes,
                    iterates,
                    diophantine: DiophantineParams { c: diophantine_c, beta_exponent: diophantine_beta, q_max },
                    threshold_factor,
                    gap_factor,
                }
            }
            Analysis::Bounded { horizon, bracket } => Command::Bounded { horizon, bracket },
            Analysis::Periodic { period, winding } => Command::Periodic { period, winding },
        },
    };
    std::process::exit(run(&common, &command) as i32);
}
