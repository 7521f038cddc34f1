//! Reachability scoring and placement baselines.

mod coverage;
mod density;
mod ik;

pub use coverage::{coverage, ReachabilityIndex, DEFAULT_FK_SAMPLES, DEFAULT_TOLERANCE};
pub use density::{compare_density, density_train_config, DensityConfig, DensityMethod, DensityReport, DensityRow, DEFAULT_GMM_COMPONENTS, TEST_SEED_OFFSET};
pub use ik::{ik_refine, ik_solve, IkSolution, DEFAULT_IK_ITERATIONS, IK_TOLERANCE};

use std::fmt::{self, Write as _};
use std::time::Instant;

use nalgebra::Vector3;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datasets::SceneSpec;
use crate::error::{Error, Result};
use crate::format::sig6;
use crate::kinematics::{BaseConfig, KinematicChain};
use crate::samples::Samples;
use crate::sim::{nce_fit, nce_fit_in, EnergyFunction, EnergyModel, SamplingBox, TrainConfig};
use crate::solver::{project_to_boundary, sample_feasible, solve_multistart, SolverConfig};

/// Rejection batches allowed when drawing points from an ROI model.
const MAX_ROI_BATCHES: usize = 1000;
const ROI_BATCH: usize = 4096;

/// Draws `count` points from the ROI model by rejection: uniform proposals
/// over `proposal` accepted with probability `sigmoid(E)`.
pub fn sample_roi_points<R: Rng>(
    roi: &EnergyModel,
    proposal: &SamplingBox,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vector3<f64>>> {
    if roi.input_dim() != 3 {
        return Err(Error::Shape { expected: 3, got: roi.input_dim() });
    }
    if proposal.dim() != 3 {
        return Err(Error::Shape { expected: 3, got: proposal.dim() });
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..MAX_ROI_BATCHES {
        let proposals = proposal.sample(ROI_BATCH, rng);
        let energies = roi.energies(proposals.as_slice())?;
        for (p, e) in proposals.rows().zip(energies) {
            if out.len() == count {
                return Ok(out);
            }
            if rng.random::<f64>() < crate::sim::sigmoid(e) {
                out.push(Vector3::new(p[0], p[1], p[2]));
            }
        }
        if out.len() == count {
            return Ok(out);
        }
    }
    Err(Error::BaselineFailure(format!("drew only {} of {count} ROI points", out.len())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkBaselineResult {
    pub base: BaseConfig,
    /// One placement per ROI point where IK succeeded.
    pub found: Vec<BaseConfig>,
    pub attempted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkBaselineConfig {
    pub points: usize,
    pub candidates: usize,
    pub iterations: usize,
}

impl Default for IkBaselineConfig {
    fn default() -> Self {
        Self { points: 50, candidates: 200, iterations: DEFAULT_IK_ITERATIONS }
    }
}

/// Mean of IK-feasible placements for points drawn from the ROI model
/// (proposals over `roi_box`), pushed back into the feasible set.
#[allow(clippy::too_many_arguments)]
pub fn ik_baseline(
    roi: &EnergyModel,
    roi_box: &SamplingBox,
    constraint: Option<&EnergyModel>,
    chain: &KinematicChain,
    xy_region: &SamplingBox,
    ik: &IkBaselineConfig,
    solver: &SolverConfig,
    seed: u64,
) -> Result<IkBaselineResult> {
    solver.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets = sample_roi_points(roi, roi_box, ik.points, &mut rng)?;
    let constraint_fn = constraint.map(|c| c as &dyn EnergyFunction);
    let mut found = Vec::new();
    for target in &targets {
        for _ in 0..ik.candidates {
            let cand = sample_feasible(constraint_fn, xy_region, solver, &mut rng)?;
            if ik_solve(chain, target, &cand, ik.iterations).is_some() {
                found.push(cand);
                break;
            }
        }
    }
    if found.is_empty() {
        return Err(Error::BaselineFailure("IK succeeded for no sampled ROI point".into()));
    }
    let n = found.len() as f64;
    let mut mean = BaseConfig::default();
    for c in &found {
        mean.x += c.x / n;
        mean.y += c.y / n;
        mean.z += c.z / n;
        mean.omega += c.omega / n;
    }
    mean.z = mean.z.clamp(solver.z_limits.0, solver.z_limits.1);
    mean.omega = mean.omega.clamp(solver.omega_limits.0, solver.omega_limits.1);
    let base = match constraint_fn {
        Some(g) if !solver.is_feasible(Some(g), &mean)? => {
            match project_to_boundary(g, [mean.x, mean.y], solver.tau, solver.project_iterations, solver.epsilon) {
                Ok(p) if p.converged => BaseConfig { x: p.point[0], y: p.point[1], ..mean },
                // Fall back to the found placement nearest the mean.
                _ => *found
                    .iter()
                    .min_by(|a, b| {
                        let da = (a.x - mean.x).powi(2) + (a.y - mean.y).powi(2);
                        let db = (b.x - mean.x).powi(2) + (b.y - mean.y).powi(2);
                        da.total_cmp(&db)
                    })
                    .expect("found is non-empty"),
            }
        }
        _ => mean,
    };
    Ok(IkBaselineResult { base, found, attempted: targets.len() })
}

/// A uniformly random feasible placement.
pub fn random_baseline(
    constraint: Option<&dyn EnergyFunction>,
    xy_region: &SamplingBox,
    solver: &SolverConfig,
    seed: u64,
) -> Result<BaseConfig> {
    sample_feasible(constraint, xy_region, solver, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Random,
    Ik,
    Ours,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::Ik => "ik",
            Self::Ours => "ours",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub method: Method,
    pub coverage: f64,
    pub runtime_s: f64,
    pub placement: BaseConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilityReport {
    pub scene: String,
    pub methods: Vec<MethodResult>,
    pub test_points: usize,
    pub fk_samples: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl ReachabilityReport {
    pub fn method(&self, m: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|r| r.method == m)
    }

    /// Rows `scene, method, coverage %, placement`; reproducible given seeds.
    pub fn coverage_tsv(&self, with_header: bool) -> String {
        let mut out = String::new();
        if with_header {
            out.push_str("scene\tmethod\tcoverage_pct\tx\ty\tz\tomega\n");
        }
        for r in &self.methods {
            let p = &r.placement;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                self.scene,
                r.method,
                sig6(100.0 * r.coverage),
                sig6(p.x),
                sig6(p.y),
                sig6(p.z),
                sig6(p.omega)
            );
        }
        out
    }

    /// Rows `scene, method, runtime s`.
    pub fn runtime_tsv(&self, with_header: bool) -> String {
        let mut out = String::new();
        if with_header {
            out.push_str("scene\tmethod\truntime_s\n");
        }
        for r in &self.methods {
            let _ = writeln!(out, "{}\t{}\t{}", self.scene, r.method, sig6(r.runtime_s));
        }
        out
    }

    /// Tab-separated rows `scene, method, coverage %, runtime s, placement`.
    pub fn to_tsv(&self, with_header: bool) -> String {
        let mut out = String::new();
        if with_header {
            out.push_str("scene\tmethod\tcoverage_pct\truntime_s\tx\ty\tz\tomega\n");
        }
        for r in &self.methods {
            let p = &r.placement;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                self.scene,
                r.method,
                sig6(100.0 * r.coverage),
                sig6(r.runtime_s),
                sig6(p.x),
                sig6(p.y),
                sig6(p.z),
                sig6(p.omega)
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub train: TrainConfig,
    pub solver: SolverConfig,
    pub restarts: usize,
    pub ik: IkBaselineConfig,
    /// Random placements averaged for the random baseline.
    pub random_draws: usize,
    pub fk_samples: usize,
    pub tolerance: f64,
    pub test_points: usize,
    pub constraint_padding: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            solver: SolverConfig::default(),
            restarts: 4,
            ik: IkBaselineConfig::default(),
            random_draws: 16,
            fk_samples: DEFAULT_FK_SAMPLES,
            tolerance: DEFAULT_TOLERANCE,
            test_points: 1000,
            constraint_padding: DEFAULT_CONSTRAINT_PADDING,
            seed: 0,
        }
    }
}

/// The scene's trained models.
#[derive(Debug, Clone)]
pub struct SceneModels {
    pub roi: EnergyModel,
    pub constraint: Option<EnergyModel>,
}

impl SceneModels {
    pub fn constraint_fn(&self) -> Option<&dyn EnergyFunction> {
        self.constraint.as_ref().map(|c| c as &dyn EnergyFunction)
    }
}

/// Padding of the 2D constraint model's negative box. Under 1:1 NCE the
/// best in-region probability is `r / (1 + r)` with `r` the ratio of box to
/// region area; padding 2.5 gives `r = 36`, comfortably above the `r = 19`
/// a 0.95 threshold needs.
pub const DEFAULT_CONSTRAINT_PADDING: f64 = 2.5;

/// Floor-plane box placements are drawn from: the permissible points'
/// bounds, or the ROI bounds grown by the reach bound when unconstrained.
pub fn placement_region(scene: &SceneSpec, chain: &KinematicChain) -> Result<SamplingBox> {
    match scene.permissible_points()? {
        Some(p) => SamplingBox::around(&Samples::from_points2(&p.xy()), 0.0),
        None => {
            let (lo, hi) = scene.roi_points()?.bounds();
            let r = chain.reach_bound();
            SamplingBox::new(vec![lo.x - r, lo.y - r], vec![hi.x + r, hi.y + r])
        }
    }
}

/// Fits the 3D ROI model and, when the scene has a permissible sketch, the
/// 2D constraint model on its floor-plane coordinates.
pub fn fit_scene_models(
    scene: &SceneSpec,
    chain: &KinematicChain,
    train: &TrainConfig,
    constraint_padding: f64,
) -> Result<SceneModels> {
    let roi_points = Samples::from(&scene.roi_points()?);
    let bx = reachable_box(&roi_points, &placement_region(scene, chain)?, scene.z_limits, chain.reach_bound() + chain.mount_origin().norm())?;
    let positives = repeat_to(&roi_points, ROI_MIN_POSITIVES);
    let roi = nce_fit_in(&positives, train, bx)?;
    let constraint = match scene.permissible_points()? {
        Some(p) => {
            let xy = Samples::from_points2(&p.xy());
            let xy = subsample(&xy, CONSTRAINT_MAX_POSITIVES, train.seed);
            let config = TrainConfig { seed: train.seed.wrapping_add(1), padding: constraint_padding, ..train.clone() };
            Some(nce_fit(&xy, &config)?)
        }
        None => None,
    };
    Ok(SceneModels { roi, constraint })
}

/// Positives per epoch for ROI models; smaller point sets are cycled.
pub const ROI_MIN_POSITIVES: usize = 2048;
/// Floor points kept for training the constraint model.
pub const CONSTRAINT_MAX_POSITIVES: usize = 2048;

/// Box holding the ROI and every end-effector position reachable from a
/// base in `region` with height in `z_limits`.
pub fn reachable_box(roi: &Samples, region: &SamplingBox, z_limits: (f64, f64), reach: f64) -> Result<SamplingBox> {
    let (mut lo, mut hi) = roi.bounds();
    for k in 0..2 {
        lo[k] = lo[k].min(region.lo[k] - reach);
        hi[k] = hi[k].max(region.hi[k] + reach);
    }
    lo[2] = lo[2].min(z_limits.0 - reach);
    hi[2] = hi[2].max(z_limits.1 + reach);
    SamplingBox::new(lo, hi)
}

fn subsample(points: &Samples, count: usize, seed: u64) -> Samples {
    if points.len() <= count {
        return points.clone();
    }
    let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), points.len(), count).into_vec();
    idx.sort_unstable();
    points.select(&idx)
}

fn repeat_to(points: &Samples, count: usize) -> Samples {
    if points.len() >= count {
        return points.clone();
    }
    let idx: Vec<usize> = (0..count).map(|i| i % points.len()).collect();
    points.select(&idx)
}

/// Seeded subsample of at most `count` points.
pub fn test_subsample(points: &[Vector3<f64>], count: usize, seed: u64) -> Vec<Vector3<f64>> {
    if points.len() <= count {
        return points.to_vec();
    }
    let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), points.len(), count).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| points[i]).collect()
}

/// Scores random, IK-mean and solver placements on one frozen ROI test set.
pub fn run_benchmark_with_models(
    scene: &SceneSpec,
    models: &SceneModels,
    chain: &KinematicChain,
    config: &BenchConfig,
) -> Result<ReachabilityReport> {
    let solver = SolverConfig {
        z_limits: scene.z_limits,
        omega_limits: scene.omega_limits,
        seed: config.seed,
        ..config.solver.clone()
    };
    let roi_points = scene.roi_points()?;
    let test = test_subsample(roi_points.points(), config.test_points, config.seed);
    let index = ReachabilityIndex::new(chain, config.fk_samples, config.tolerance, config.seed)?;
    let region = placement_region(scene, chain)?;

    let start = Instant::now();
    let mut random_cov = 0.0;
    let mut first = None;
    for k in 0..config.random_draws.max(1) {
        let c = random_baseline(models.constraint_fn(), &region, &solver, config.seed.wrapping_add(k as u64))?;
        random_cov += index.coverage(&c, &test)?;
        first.get_or_insert(c);
    }
    let draws = config.random_draws.max(1) as f64;
    let random = MethodResult {
        method: Method::Random,
        coverage: random_cov / draws,
        runtime_s: start.elapsed().as_secs_f64() / draws,
        placement: first.expect("at least one draw"),
    };

    let start = Instant::now();
    let roi_box = SamplingBox::around(&Samples::from(&roi_points), config.train.padding)?;
    let ik = ik_baseline(&models.roi, &roi_box, models.constraint.as_ref(), chain, &region, &config.ik, &solver, config.seed)?;
    let ik_time = start.elapsed().as_secs_f64();
    let ik = MethodResult { method: Method::Ik, coverage: index.coverage(&ik.base, &test)?, runtime_s: ik_time, placement: ik.base };

    let start = Instant::now();
    let ours = solve_multistart(&models.roi, models.constraint_fn(), chain, &solver, config.restarts, &region)?;
    let ours_time = start.elapsed().as_secs_f64();
    let ours =
        MethodResult { method: Method::Ours, coverage: index.coverage(&ours.best, &test)?, runtime_s: ours_time, placement: ours.best };

    Ok(ReachabilityReport {
        scene: scene.name.clone(),
        methods: vec![random, ik, ours],
        test_points: test.len(),
        fk_samples: config.fk_samples,
        tolerance: config.tolerance,
        seed: config.seed,
    })
}

/// Trains the scene models, then runs [`run_benchmark_with_models`].
pub fn run_benchmark(scene: &SceneSpec, chain: &KinematicChain, config: &BenchConfig) -> Result<ReachabilityReport> {
    let models = fit_scene_models(scene, chain, &config.train, config.constraint_padding)?;
    run_benchmark_with_models(scene, &models, chain, config)
}

#[cfg(test)]
mod tests;
