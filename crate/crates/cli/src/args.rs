//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sdi_core::eval::{BenchConfig, DensityConfig, IkBaselineConfig, DEFAULT_CONSTRAINT_PADDING};
use sdi_core::solver::{Resampling, SolverConfig};
use sdi_core::TrainConfig;

#[derive(Debug, Parser)]
#[command(name = "sdi", version, about = "Sketch-driven spatial instruction maps and mobile base placement")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Builtin scene utilities.
    #[command(subcommand)]
    Scene(SceneCommand),
    /// Fit the ROI and constraint maps of a scene.
    Fit(FitArgs),
    /// Optimize the base placement against fitted maps.
    Solve(SolveArgs),
    /// Score random, IK-mean and optimized placements on a scene.
    Bench(BenchArgs),
    /// Held-out log-likelihood of KDE, GMMs and the energy model on a shape.
    CompareDensity(DensityArgs),
    /// Serve the sketching HTTP API for one scene.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum SceneCommand {
    /// Write a builtin scene as a scene file, depth file and preview image.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Builtin scene name (tables-a, tables-b, drawer, mixed).
    pub name: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for sketch jitter.
    #[arg(long, default_value_t = 0)]
    pub scene_seed: u64,
}

/// Training flags; unset flags keep the command's defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Negative box growth per side, as a fraction of the data extent.
    #[arg(long)]
    pub padding: Option<f64>,
    #[arg(long)]
    pub negative_ratio: Option<f64>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
}

impl TrainArgs {
    pub fn apply(&self, base: TrainConfig, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            weight_decay: self.weight_decay.unwrap_or(base.weight_decay),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            epochs: self.epochs.unwrap_or(base.epochs),
            padding: self.padding.unwrap_or(base.padding),
            negative_ratio: self.negative_ratio.unwrap_or(base.negative_ratio),
            hidden: self.hidden.clone().unwrap_or(base.hidden),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ResamplingArg {
    FreshPerStep,
    Fixed,
}

impl From<ResamplingArg> for Resampling {
    fn from(r: ResamplingArg) -> Self {
        match r {
            ResamplingArg::FreshPerStep => Resampling::FreshPerStep,
            ResamplingArg::Fixed => Resampling::Fixed,
        }
    }
}

fn solver_default() -> SolverConfig {
    SolverConfig::default()
}

/// Solver flags. Defaults are N = 1024, T = 40, alpha = 0.005, tau = 0.95,
/// 20 projection iterations; z and omega limits default to the scene's.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Gradient step size alpha.
    #[arg(long, default_value_t = solver_default().step_size)]
    pub step_size: f64,
    /// Joint samples N per step.
    #[arg(long, default_value_t = solver_default().samples)]
    pub samples: usize,
    /// Ascent iterations T.
    #[arg(long, default_value_t = solver_default().iterations)]
    pub iterations: usize,
    /// Newton projection iterations.
    #[arg(long, default_value_t = solver_default().project_iterations)]
    pub project_iterations: usize,
    /// Projection tolerance in energy units.
    #[arg(long, default_value_t = solver_default().epsilon)]
    pub epsilon: f64,
    /// Feasibility threshold on the constraint probability.
    #[arg(long, default_value_t = solver_default().tau)]
    pub tau: f64,
    #[arg(long)]
    pub z_min: Option<f64>,
    #[arg(long)]
    pub z_max: Option<f64>,
    #[arg(long)]
    pub omega_min: Option<f64>,
    #[arg(long)]
    pub omega_max: Option<f64>,
    #[arg(long, value_enum, default_value_t = ResamplingArg::FreshPerStep)]
    pub resampling: ResamplingArg,
    /// Random feasible starts; the best final expected energy wins.
    #[arg(long, default_value_t = BenchConfig::default().restarts)]
    pub restarts: usize,
}

impl Default for SolverArgs {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            step_size: d.step_size,
            samples: d.samples,
            iterations: d.iterations,
            project_iterations: d.project_iterations,
            epsilon: d.epsilon,
            tau: d.tau,
            z_min: None,
            z_max: None,
            omega_min: None,
            omega_max: None,
            resampling: ResamplingArg::FreshPerStep,
            restarts: BenchConfig::default().restarts,
        }
    }
}

impl SolverArgs {
    /// Solver configuration with limits falling back to `z_limits` and
    /// `omega_limits`.
    pub fn config(&self, z_limits: (f64, f64), omega_limits: (f64, f64), seed: u64) -> SolverConfig {
        SolverConfig {
            step_size: self.step_size,
            samples: self.samples,
            iterations: self.iterations,
            project_iterations: self.project_iterations,
            epsilon: self.epsilon,
            tau: self.tau,
            z_limits: (self.z_min.unwrap_or(z_limits.0), self.z_max.unwrap_or(z_limits.1)),
            omega_limits: (self.omega_min.unwrap_or(omega_limits.0), self.omega_max.unwrap_or(omega_limits.1)),
            resampling: self.resampling.into(),
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Scene file, or a builtin scene name.
    pub scene: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Negative box padding of the 2D constraint map.
    #[arg(long, default_value_t = DEFAULT_CONSTRAINT_PADDING)]
    pub constraint_padding: f64,
    /// Arm description file; defaults to the bundled 6-joint arm.
    #[arg(long)]
    pub chain: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub scene_seed: u64,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub scene: String,
    /// Directory holding roi.sim and optionally constraint.sim.
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub chain: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub scene_seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub scene: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Reuse fitted models instead of training.
    #[arg(long)]
    pub models: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = DEFAULT_CONSTRAINT_PADDING)]
    pub constraint_padding: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// FK samples M behind the coverage oracle.
    #[arg(long, default_value_t = BenchConfig::default().fk_samples)]
    pub fk_samples: usize,
    /// Coverage tolerance delta in meters.
    #[arg(long, default_value_t = BenchConfig::default().tolerance)]
    pub tolerance: f64,
    #[arg(long, default_value_t = BenchConfig::default().test_points)]
    pub test_points: usize,
    /// ROI points drawn for the IK baseline.
    #[arg(long, default_value_t = IkBaselineConfig::default().points)]
    pub ik_points: usize,
    /// Random feasible candidates tried per IK target.
    #[arg(long, default_value_t = IkBaselineConfig::default().candidates)]
    pub ik_candidates: usize,
    #[arg(long, default_value_t = IkBaselineConfig::default().iterations)]
    pub ik_iterations: usize,
    /// Random placements averaged for the random baseline.
    #[arg(long, default_value_t = BenchConfig::default().random_draws)]
    pub random_draws: usize,
    /// Rows and columns of the emitted probability grids.
    #[arg(long, default_value_t = 80)]
    pub grid_cells: usize,
    #[arg(long)]
    pub chain: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub scene_seed: u64,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// cuboid, plane, circle, plane+circle or star.
    pub shape: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DensityConfig::default().train_count)]
    pub train_count: usize,
    #[arg(long, default_value_t = DensityConfig::default().test_count)]
    pub test_count: usize,
    /// Uniform samples behind the partition-function estimate.
    #[arg(long, default_value_t = DensityConfig::default().partition_samples)]
    pub partition_samples: usize,
    /// Mixture sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DensityConfig::default().gmm_components)]
    pub gmm: Vec<usize>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    pub scene: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Start without the scene's own sketches.
    #[arg(long)]
    pub blank: bool,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = DEFAULT_CONSTRAINT_PADDING)]
    pub constraint_padding: f64,
    #[arg(long)]
    pub chain: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub scene_seed: u64,
}
