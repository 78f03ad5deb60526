//! Command-line runner: parses a TOML run configuration, farms replicas in
//! parallel with deterministic seeding, and emits CSV data plus a
//! machine-readable report per invocation. Exit status 0 means every
//! requested validation passed its threshold.

use clap::{Args, Parser, Subcommand};
use inert_atlas::config::{validate_config, RunConfig};
use inert_atlas::runner::{self, OutputKind};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "inert-atlas",
    about = "Simulate N Brownian particles above a massive inert particle and validate the predicted long-time behavior",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration document (TOML)
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory for report.json and CSV files
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for replica execution (0 = machine core count)
    #[arg(short, long, default_value_t = 0)]
    jobs: usize,
    /// Override the base seed from the config
    #[arg(short, long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trajectories and write them as CSV
    Simulate(CommonArgs),
    /// Estimate the long-run growth rates of positions and local times
    Lln(CommonArgs),
    /// Compare post-burn-in marginals with the product-form stationary law
    Stationary(CommonArgs),
    /// Check the analytic stationarity identities (no simulation)
    StationaryCheck {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of interior probe points
        #[arg(long, default_value_t = 100)]
        probes: usize,
    },
    /// Fraction of replicas whose second local time outruns the first
    Ordering(CommonArgs),
    /// Tail of the first-passage time of the velocity to a level
    Hitting(CommonArgs),
    /// Convergence proxy: marginal KS distance to stationarity over time
    Decay(CommonArgs),
    /// Compare the Skorokhod solver with a brute-force oracle
    SkorokhodTest {
        #[command(flatten)]
        common: CommonArgs,
        /// Random trials
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Grid points per trial path
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
}

fn load_config(common: &CommonArgs) -> Result<(RunConfig, String), String> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| format!("cannot read config {}: {e}", common.config.display()))?;
    let mut config = validate_config(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = common.seed {
        config.base_seed = seed;
    }
    Ok((config, text))
}

fn effective_jobs(jobs: usize) -> usize {
    if jobs == 0 {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    } else {
        jobs
    }
}

fn run_kind(common: &CommonArgs, kind: OutputKind) -> Result<bool, String> {
    let (config, text) = load_config(common)?;
    let jobs = effective_jobs(common.jobs);
    let report = runner::run(&config, &text, &[kind], &common.out, jobs)
        .map_err(|e| e.to_string())?;
    for (est, tgt) in report.estimates.iter().zip(report.targets.iter()) {
        eprintln!(
            "{}: {} = {:.6} (target {} within {})",
            kind.name(),
            est.name,
            est.value,
            tgt.value,
            tgt.tolerance
        );
    }
    eprintln!(
        "{}: {} -> {}",
        kind.name(),
        common.out.join("report.json").display(),
        if report.pass { "pass" } else { "FAIL" }
    );
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(c) => run_kind(c, OutputKind::TrajectoryCsv),
        Command::Lln(c) => run_kind(c, OutputKind::Lln),
        Command::Stationary(c) => run_kind(c, OutputKind::Stationary),
        Command::Ordering(c) => run_kind(c, OutputKind::Ordering),
        Command::Hitting(c) => run_kind(c, OutputKind::Hitting),
        Command::Decay(c) => run_kind(c, OutputKind::Decay),
        Command::StationaryCheck { common, probes } => (|| {
            let (config, _) = load_config(common)?;
            let report = runner::run_stationary_check(
                config.n,
                config.g,
                *probes,
                config.base_seed,
                &common.out,
            )
            .map_err(|e| e.to_string())?;
            eprintln!(
                "stationary-check: identity {:.3e}, interior {:.3e}, boundary max {:.3e}",
                report.identity_residual,
                report.interior_residual,
                report
                    .boundary_residuals
                    .iter()
                    .cloned()
                    .fold(0.0f64, f64::max),
            );
            Ok(true)
        })(),
        Command::SkorokhodTest {
            common,
            trials,
            steps,
        } => (|| {
            let (config, _) = load_config(common)?;
            let report = runner::run_skorokhod_test(
                config.n,
                *trials,
                *steps,
                config.base_seed,
                &common.out,
            )
            .map_err(|e| e.to_string())?;
            eprintln!(
                "skorokhod-test: max deviation {:.3e}, max complementarity {:.3e} -> {}",
                report.max_deviation,
                report.max_complementarity,
                if report.pass { "pass" } else { "FAIL" }
            );
            Ok(report.pass)
        })(),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
