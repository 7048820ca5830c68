//! `sbmlab`: identity checks, density tables, SDE and particle simulations,
//! and the comparison experiments, written as CSV and JSON artifacts.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use output::{Manifest, OutputDir, Status};

#[derive(Debug, Parser)]
#[command(name = "sbmlab", version, about = "Local-time SDE laboratory for super-Brownian motion")]
struct Cli {
    /// Key-value config file; command-line flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving every artifact and `manifest.json`.
    #[arg(long = "output_dir", global = true, default_value = "sbmlab_out")]
    output_dir: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, env = "SBMLAB_WORKERS", default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Identity suite over the special functions, stable density and drift.
    Selfcheck(SelfcheckArgs),
    /// Tables of the stable density, its ratio and the drift fields on a grid.
    Density(DensityArgs),
    /// Local-time SDE paths by the direct scheme or the time-changed diffusion.
    Sde(SdeArgs),
    /// Branching Brownian particle replicates and their banded local times.
    Particles(ParticlesArgs),
    /// Comparison experiments between the particle system and the SDE.
    Compare(CompareArgs),
    /// Kernel-conditioned Monte Carlo for jump functionals of the stable bridge.
    Bridge(BridgeArgs),
}

const SUBCOMMANDS: [&str; 6] = ["selfcheck", "density", "sde", "particles", "compare", "bridge"];

#[derive(Debug, Args, Serialize)]
#[command(rename_all = "snake_case", args_override_self = true)]
pub struct SelfcheckArgs {
    /// CSV file name inside the output directory.
    #[arg(long, default_value = "selfcheck.csv")]
    pub out: String,
}

#[derive(Debug, Args, Serialize)]
#[command(rename_all = "snake_case", args_override_self = true)]
pub struct DensityArgs {
    /// Grid `start:stop:step`, both ends included.
    #[arg(long, default_value = "-8:8:0.1", allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long, default_value = "density.csv")]
    pub out: String,
    /// Also tabulate the Fourier-inversion density at this relative tolerance.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fourier_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum SdeMode {
    /// Direct Euler scheme for the local-time SDE.
    Main,
    /// Time-changed diffusion `Z` and its growth factor.
    Z,
    /// Local time rebuilt from the time-changed diffusion.
    Reconstruct,
}

#[derive(Debug, Args, Serialize)]
#[command(rename_all = "snake_case", args_override_self = true)]
pub struct SdeArgs {
    #[arg(long, value_enum, default_value = "main")]
    pub mode: SdeMode,
    /// Initial local time (main mode).
    #[arg(long, default_value_t = 1.0)]
    pub t0: f64,
    /// Initial derivative (main mode).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub ydot0: f64,
    /// Initial state of the time-changed diffusion.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub z0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda0: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub dx: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 200.0)]
    pub xmax: f64,
    #[arg(long, default_value_t = 1e4)]
    pub tmax: f64,
    #[arg(long, default_value_t = 10)]
    pub paths: usize,
    /// Keep every `stride`-th grid point in the path CSV; the last point is always kept.
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "paths.csv")]
    pub out: String,
}

#[derive(Debug, Args, Serialize)]
#[command(rename_all = "snake_case", args_override_self = true)]
pub struct ParticlesArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long = "N", default_value_t = 100)]
    #[serde(rename = "N")]
    pub n: usize,
    #[arg(long, default_value_t = 6.25e-4)]
    pub dt: f64,
    /// Band-centre window `lo:hi`.
    #[arg(long, default_value = "-1:1.5", allow_hyphen_values = true)]
    pub window: String,
    #[arg(long, default_value_t = 0.05)]
    pub bandwidth: f64,
    #[arg(long, default_value_t = 25.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "particles.csv")]
    pub out: String,
    /// Also run the calibration checks and write `calibration.json`.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub calibrate: bool,
    /// Count-only runs per population size for the mass-variance check.
    #[arg(long, default_value_t = 40_000)]
    pub variance_runs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Particle local times versus the SDE started from them.
    Transition,
}

#[derive(Debug, Args, Serialize)]
#[command(rename_all = "snake_case", args_override_self = true)]
pub struct CompareArgs {
    #[arg(long, value_enum, default_value = "transition")]
    pub experiment: Experiment,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.3)]
    pub a0: f64,
    #[arg(long, default_value_t = 0.3)]
    pub delta: f64,
    #[arg(long, default_value_t = 2000)]
    pub replicates: usize,
    #[arg(long = "N", default_value_t = 100)]
    #[serde(rename = "N")]
    pub n: usize,
    #[arg(long, default_value_t = 6.25e-4)]
    pub dt: f64,
    #[arg(long, default_value_t = 0.05)]
    pub bandwidth: f64,
    #[arg(long, default_value = "-1:1.5", allow_hyphen_values = true)]
    pub window: String,
    #[arg(long, default_value_t = 1e-4)]
    pub sde_dx: f64,
    #[arg(long, default_value_t = 0.06)]
    pub ks_threshold: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "comparison.json")]
    pub out: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    /// Sum of the jumps above `eps`.
    TruncSum,
    /// Sum of `Y γ(3Y/(2h²))` over the jumps.
    GammaSum,
}

#[derive(Debug, Args, Serialize)]
#[command(rename_all = "snake_case", args_override_self = true)]
pub struct BridgeArgs {
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub y: f64,
    /// Half-width of the conditioning window on `U_t`.
    #[arg(long, default_value_t = 0.05)]
    pub h_bin: f64,
    #[arg(long, value_enum, default_value = "trunc_sum")]
    pub functional: FunctionalKind,
    /// Truncation level of `trunc_sum`.
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    /// Spatial step of `gamma_sum`.
    #[arg(long, default_value_t = 0.5)]
    pub h: f64,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "bridge.json")]
    pub out: String,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum RunError {
    /// Invalid configuration: exit 2.
    Usage(anyhow::Error),
    /// The experiment itself failed: exit 1.
    Failed(anyhow::Error),
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        RunError::Failed(e)
    }
}

/// Core errors that reflect bad parameters rather than a failed run.
fn classify(e: sbmlab::Error) -> RunError {
    match e {
        sbmlab::Error::Invalid(_) | sbmlab::Error::Domain { .. } => RunError::Usage(e.into()),
        other => RunError::Failed(other.into()),
    }
}

impl From<sbmlab::Error> for RunError {
    fn from(e: sbmlab::Error) -> Self {
        classify(e)
    }
}

fn resolved(cli: &Cli) -> (String, serde_json::Map<String, serde_json::Value>, Option<u64>) {
    let (name, value) = match &cli.command {
        Command::Selfcheck(a) => ("selfcheck", serde_json::to_value(a)),
        Command::Density(a) => ("density", serde_json::to_value(a)),
        Command::Sde(a) => ("sde", serde_json::to_value(a)),
        Command::Particles(a) => ("particles", serde_json::to_value(a)),
        Command::Compare(a) => ("compare", serde_json::to_value(a)),
        Command::Bridge(a) => ("bridge", serde_json::to_value(a)),
    };
    let map = match value {
        Ok(serde_json::Value::Object(m)) => m,
        _ => serde_json::Map::new(),
    };
    let seed = map.get("seed").and_then(|s| s.as_u64());
    (name.to_string(), map, seed)
}

fn config_pairs(map: &serde_json::Map<String, serde_json::Value>) -> Vec<(String, String)> {
    map.iter()
        .map(|(k, v)| {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            (k.clone(), s)
        })
        .collect()
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect(), &SUBCOMMANDS) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let mut out = match OutputDir::create(&cli.output_dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let (experiment, map, master_seed) = resolved(&cli);
    let started = output::unix_now();
    let clock = Instant::now();
    let result = match &cli.command {
        Command::Selfcheck(a) => commands::selfcheck(a, &mut out),
        Command::Density(a) => commands::density(a, &mut out),
        Command::Sde(a) => commands::sde(a, &mut out),
        Command::Particles(a) => commands::particles(a, &mut out),
        Command::Compare(a) => commands::compare(a, &mut out),
        Command::Bridge(a) => commands::bridge(a, &mut out),
    };
    let (status, error, code) = match result {
        Ok(true) => (Status::Pass, None, 0),
        Ok(false) => (Status::Fail, None, 1),
        Err(RunError::Usage(e)) => (Status::Error, Some(format!("{e:#}")), 2),
        Err(RunError::Failed(e)) => (Status::Error, Some(format!("{e:#}")), 1),
    };
    if let Some(e) = &error {
        eprintln!("error: {e}");
    }
    let pairs = config_pairs(&map);
    let config_text = config::render(&pairs);
    if let Err(e) = out.write("run.conf", config_text.as_bytes()) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    let manifest = Manifest {
        tool: "sbmlab",
        version: env!("CARGO_PKG_VERSION"),
        experiment,
        config: map,
        config_file: "run.conf".into(),
        master_seed,
        workers: rayon::current_num_threads(),
        status,
        error,
        artifacts: out.artifacts().to_vec(),
        started_unix: started,
        elapsed_seconds: clock.elapsed().as_secs_f64(),
    };
    if let Err(e) = out.write_json("manifest.json", &manifest) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
