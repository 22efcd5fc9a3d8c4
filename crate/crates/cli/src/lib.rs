//! CLI front end: scenario configuration, pointwise and grid evaluation,
//! solver comparisons, the stochastic control experiment, and the
//! self-test. Exit codes: 0 success, 1 failed self-test, 2 configuration
//! error, 3 numerical failure.

pub mod commands;
pub mod config;

use std::path::PathBuf;
use std::sync::Once;

use clap::{Parser, Subcommand};

use commands::Ctx;
use config::ScenarioConfig;

#[derive(Debug, Parser)]
#[command(
    name = "hjc",
    about = "Grid-free Hamilton-Jacobi value evaluation, reference solvers, and game values"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV/JSON results.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (never changes numerical output).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed override for randomized search and Monte Carlo streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use the full-resolution experiment settings (much slower).
    #[arg(long = "paper-scale", global = true)]
    paper_scale: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the value at the configured query points.
    Value,
    /// Evaluate the value over the configured rectangle.
    Grid,
    /// Compare the characteristics value against the reference solver.
    FdCompare,
    /// Compare against the boundary-value alignment heuristic.
    BvpCompare,
    /// Evaluate game values and saddle controls.
    Game,
    /// Run the open-loop vs recomputed-feedback noise experiment.
    Mpc,
    /// Run the acceptance checks.
    Selftest,
}

static THREAD_POOL: Once = Once::new();

/// Runs the CLI; `args` includes the program name.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };

    if let Some(threads) = cli.threads {
        THREAD_POOL.call_once(|| {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        });
    }

    if let Command::Selftest = cli.command {
        return if commands::cmd_selftest(cli.paper_scale) {
            0
        } else {
            1
        };
    }

    let Some(config_path) = &cli.config else {
        eprintln!("error: --config PATH is required for this subcommand");
        return 2;
    };
    let text = match std::fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_path.display());
            return 2;
        }
    };
    let config: ScenarioConfig = match serde_json::from_str(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: invalid configuration: {e}");
            return 2;
        }
    };

    let ctx = Ctx {
        config: &config,
        out_dir: &cli.out,
        seed_override: cli.seed,
        paper_scale: cli.paper_scale,
    };
    let result = match cli.command {
        Command::Value => commands::cmd_value(&ctx),
        Command::Grid => commands::cmd_grid(&ctx),
        Command::FdCompare => commands::cmd_fd_compare(&ctx),
        Command::BvpCompare => commands::cmd_bvp_compare(&ctx),
        Command::Game => commands::cmd_game(&ctx),
        Command::Mpc => commands::cmd_mpc(&ctx),
        Command::Selftest => unreachable!(),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                hjcore::Error::InvalidConfig(_)
                | hjcore::Error::InvalidProblem(_)
                | hjcore::Error::DimensionMismatch { .. } => 2,
                _ => 3,
            }
        }
    }
}
