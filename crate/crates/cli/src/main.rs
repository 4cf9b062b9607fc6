use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use densnav_cli::output::{append_record, sha256_hex, RunRecord, SEED_DERIVATION, VERSION};
use densnav_cli::{cmd_arm, cmd_compare_nf, cmd_run, cmd_sweep, cmd_verify, CliError, CompareArgs, Options, Scenario, SweepGrid};
use serde_json::json;

#[derive(Parser)]
#[command(name = "densnav", version, about = "Density-function navigation: simulate, audit, compare, plot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, env = "DENSNAV_OUT", default_value = "out")]
    out: PathBuf,
    /// Master seed; run i draws noise from a seed derived from it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Replace the scenario's integrator step.
    #[arg(long)]
    dt_override: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every initial condition; trajectories, summary and plot.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Divergence, gradient, occupancy and theta audits.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Divergence grid points per axis.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Density controller against a navigation function in a cavity.
    CompareNf {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        kappas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        /// Number of initial conditions.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Two-link arm swing-up around task-space obstacles.
    Arm {
        #[command(flatten)]
        common: Common,
    },
    /// Converged fraction over a grid of tuning parameters.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        thetas: Option<Vec<f64>>,
        /// Uniform sensing margins replacing every sensing boundary.
        #[arg(long, value_delimiter = ',')]
        margins: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        u_maxes: Option<Vec<f64>>,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (name, common) = match &cli.command {
        Command::Run { common } => ("run", common),
        Command::Verify { common, .. } => ("verify", common),
        Command::CompareNf { common, .. } => ("compare-nf", common),
        Command::Arm { common } => ("arm", common),
        Command::Sweep { common, .. } => ("sweep", common),
    };
    let (scenario, bytes) = Scenario::load(&common.scenario)?;
    let opts = Options {
        out: common.out.clone(),
        seed: common.seed,
        dt_override: common.dt_override,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs)
        .build()
        .map_err(|e| CliError::Invalid {
            field: "--jobs".into(),
            message: e.to_string(),
        })?;
    let start = Instant::now();
    let summary = pool.install(|| -> Result<serde_json::Value, CliError> {
        Ok(match &cli.command {
            Command::Run { .. } => {
                let r = cmd_run(&scenario, &opts)?;
                println!("{}: {}/{} converged", r.scenario, r.stats.converged, r.stats.runs);
                let outcomes: Vec<_> = r.stats.runs_detail.iter().map(|d| d.outcome).collect();
                json!({
                    "runs": r.stats.runs,
                    "converged": r.stats.converged,
                    "unsafe_entered": r.stats.unsafe_entered,
                    "max_time": r.stats.max_time,
                    "numerical_failure": r.stats.numerical_failure,
                    "rejected": r.stats.rejected,
                    "outcomes": outcomes,
                })
            }
            Command::Verify { grid, .. } => {
                let v = cmd_verify(&scenario, &opts, *grid)?;
                let d = &v.report.divergence;
                println!(
                    "{}: violation fraction {:.4} at alpha {}, gradient error {:.2e}",
                    v.scenario, d.violation_fraction, d.alpha, v.report.gradient.max_relative_error
                );
                json!({
                    "violation_fraction": d.violation_fraction,
                    "xi": d.xi,
                    "sweep": v.report.alpha_sweep.iter().map(|s| (s.alpha, s.violation_fraction)).collect::<Vec<_>>(),
                    "gradient_max_relative_error": v.report.gradient.max_relative_error,
                })
            }
            Command::CompareNf { kappas, radii, runs, .. } => {
                let args = CompareArgs {
                    kappas: kappas.clone(),
                    radii: radii.clone(),
                    runs: *runs,
                };
                let r = cmd_compare_nf(&scenario, &opts, &args)?;
                for row in &r.rows {
                    println!(
                        "{:?} {}: {}/{} converged, {} trapped",
                        row.method, row.parameter, row.converged, row.runs, row.trapped
                    );
                }
                serde_json::to_value(&r.rows).map_err(|e| CliError::Serialize(e.to_string()))?
            }
            Command::Arm { .. } => {
                let r = cmd_arm(&scenario, &opts)?;
                println!("{}: {:?}, final error {:.4} rad", r.scenario, r.outcome, r.final_error);
                json!({
                    "outcome": r.outcome,
                    "final_error": r.final_error,
                    "occupancy_time_unsafe": r.occupancy_time_unsafe,
                    "samples": r.samples,
                })
            }
            Command::Sweep {
                alphas,
                thetas,
                margins,
                u_maxes,
                ..
            } => {
                let grid = SweepGrid {
                    alphas: alphas.clone(),
                    thetas: thetas.clone(),
                    margins: margins.clone(),
                    u_maxes: u_maxes.clone(),
                };
                let rows = cmd_sweep(&scenario, &opts, &grid)?;
                println!("{} cells", rows.len());
                serde_json::to_value(&rows).map_err(|e| CliError::Serialize(e.to_string()))?
            }
        })
    })?;
    let record = RunRecord {
        version: VERSION.into(),
        command: name.into(),
        scenario: common.scenario.display().to_string(),
        scenario_sha256: sha256_hex(&bytes),
        seed: common.seed,
        seed_derivation: SEED_DERIVATION.into(),
        jobs: pool.current_num_threads(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        summary,
    };
    append_record(&common.out, &record)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_invalid_scenario() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
