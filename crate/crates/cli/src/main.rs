mod commands;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use transpath::dynamics::Scheme;

/// Most probable transition paths of the stochastic carbon-cycle model.
#[derive(Debug, Parser)]
#[command(name = "transpath", version)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Model parameters (JSON object with mu, b, theta, nu, c_p, c_x, c_f, w0, gamma, beta, f0).
    #[arg(long, global = true, default_value = "configs/params.json")]
    pub config: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Cap on parallel tasks; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Integration step (shooting data, simulation).
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: transpath::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct ShootArgs {
    /// CO₂ injection rate; overrides the config value.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Transition time T.
    #[arg(long, default_value_t = 3.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    /// Number of targets on the discretized stable cycle.
    #[arg(long, default_value_t = 3600)]
    pub targets: usize,
    /// Initial velocities drawn for the dataset.
    #[arg(long, default_value_t = 4000)]
    pub samples: usize,
    /// Retention band around the cycle (state units); default scales with the cycle.
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long, default_value_t = 3000)]
    pub epochs: usize,
    /// Newton refinement of predicted initial velocities.
    #[arg(long)]
    pub refine: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PinnArgs {
    #[arg(long)]
    pub nu: Option<f64>,
    /// Target index on the discretized stable cycle (default: point of fastest c change).
    #[arg(long, conflicts_with = "phase")]
    pub target_index: Option<usize>,
    /// Target as a fraction of the period after the max-c anchor.
    #[arg(long)]
    pub phase: Option<f64>,
    #[arg(long, default_value_t = 3600)]
    pub targets: usize,
    #[arg(long, default_value_t = 20_000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 60.0)]
    pub lambda: f64,
    /// Collocation points.
    #[arg(long, default_value_t = 501)]
    pub m: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fixed point, stable and unstable cycles, phase portrait.
    Analyze {
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long, default_value_t = 3600)]
        targets: usize,
    },
    /// Endpoint/initial-velocity dataset for the shooting network.
    Gendata(ShootArgs),
    /// Train the shooting network on a dataset CSV.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 3000)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
    },
    /// Most probable path to the stable cycle by neural shooting.
    Path {
        #[command(flatten)]
        shoot: ShootArgs,
        /// Trained model (with --dataset); otherwise the full pipeline runs.
        #[arg(long, requires = "dataset")]
        model: Option<PathBuf>,
        #[arg(long, requires = "model")]
        dataset: Option<PathBuf>,
    },
    /// Re-run the shooting pipeline over ν or T.
    Sweep {
        #[command(flatten)]
        shoot: ShootArgs,
        #[arg(long, value_parser = ["nu", "time"])]
        axis: String,
        /// Grid as A:B:STEP, both ends included.
        #[arg(long)]
        values: String,
    },
    /// Physics-informed solve of the boundary problem at one T.
    PinnPath {
        #[command(flatten)]
        pinn: PinnArgs,
        #[arg(long, default_value_t = 3.0)]
        horizon: f64,
    },
    /// Action against T over a grid; reports the optimal transition time.
    PinnTime {
        #[command(flatten)]
        pinn: PinnArgs,
        /// T interval as A:B.
        #[arg(long, default_value = "1:11")]
        t_range: String,
        #[arg(long, default_value_t = 200)]
        t_count: usize,
    },
    /// Euler-Maruyama sample paths and escape statistics.
    Simulate {
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1.0)]
        noise_scale: f64,
        #[arg(long, default_value_t = 100)]
        runs: usize,
    },
    /// Onsager-Machlup action of a path CSV (`t,c,w` columns).
    Action {
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        nu: Option<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analyze { .. } => "analyze",
            Command::Gendata(_) => "gendata",
            Command::Train { .. } => "train",
            Command::Path { .. } => "path",
            Command::Sweep { .. } => "sweep",
            Command::PinnPath { .. } => "pinn-path",
            Command::PinnTime { .. } => "pinn-time",
            Command::Simulate { .. } => "simulate",
            Command::Action { .. } => "action",
        }
    }
}

/// Exit status for a failed run: 2 for numerical failures, 1 otherwise.
fn failure_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<transpath::Error>() {
        Some(e) if e.is_numerical() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.common.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let started = Instant::now();
    let result = commands::run(&cli);
    let status = match &result {
        Ok(_) => "ok".to_string(),
        Err(e) => format!("{e:#}"),
    };
    if let Err(e) = manifest::write(&cli, result.as_ref().ok(), &status, started.elapsed()) {
        eprintln!("warning: could not write run manifest: {e:#}");
    }
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(failure_code(&e))
        }
    }
}
