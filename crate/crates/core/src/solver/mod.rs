//! Base placement by projected gradient ascent on the expected ROI energy.

mod objective;
mod project;

pub use objective::{
    expected_energy, expected_energy_and_gradient_local, expected_energy_gradient, expected_energy_local, local_positions,
};
pub use project::{feasibility_threshold, project_to_boundary, Projection, STATIONARY_GRADIENT};

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::format::sig6;
use crate::kinematics::{BaseConfig, KinematicChain};
use crate::sim::{EnergyFunction, EnergyModel, SamplingBox};

/// Attempts allowed when drawing a feasible placement by rejection.
pub const MAX_REJECTIONS: usize = 1000;
/// Joint samples shared by all restarts when picking the best one.
pub const EVALUATION_SAMPLES: usize = 8192;
const EVALUATION_STREAM: u64 = 0x5eed_e7a1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resampling {
    /// New joint samples every iteration.
    FreshPerStep,
    /// One sample set drawn up front and reused.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub step_size: f64,
    pub samples: usize,
    pub iterations: usize,
    pub project_iterations: usize,
    /// Projection tolerance in energy units.
    pub epsilon: f64,
    pub tau: f64,
    pub z_limits: (f64, f64),
    pub omega_limits: (f64, f64),
    pub resampling: Resampling,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_size: 0.005,
            samples: 1024,
            iterations: 40,
            project_iterations: 20,
            epsilon: 1e-3,
            tau: 0.95,
            z_limits: (0.15, 0.42),
            omega_limits: (0.0, TAU),
            resampling: Resampling::FreshPerStep,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step size must be positive");
        }
        if self.samples == 0 {
            return bad("joint samples per step must be at least 1");
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad("tau must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.z_limits.0 <= self.z_limits.1) || !self.z_limits.0.is_finite() || !self.z_limits.1.is_finite() {
            return bad("z limits must satisfy min <= max");
        }
        if !(self.omega_limits.0 <= self.omega_limits.1) || !self.omega_limits.0.is_finite() || !self.omega_limits.1.is_finite()
        {
            return bad("omega limits must satisfy min <= max");
        }
        Ok(())
    }

    fn clamp_box(&self, c: &mut BaseConfig) {
        c.z = c.z.clamp(self.z_limits.0, self.z_limits.1);
        c.omega = c.omega.clamp(self.omega_limits.0, self.omega_limits.1);
    }

    /// Whether `c` satisfies the box limits and, if given, the constraint.
    pub fn is_feasible(&self, constraint: Option<&dyn EnergyFunction>, c: &BaseConfig) -> Result<bool> {
        let in_box = c.z >= self.z_limits.0
            && c.z <= self.z_limits.1
            && c.omega >= self.omega_limits.0
            && c.omega <= self.omega_limits.1;
        if !in_box {
            return Ok(false);
        }
        match constraint {
            Some(g) => Ok(g.membership_probability(&[c.x, c.y])? >= feasibility_threshold(self.tau, self.epsilon)),
            None => Ok(true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Placement after the step, clamp and projection.
    pub base: BaseConfig,
    /// Expected energy at the pre-step placement.
    pub expected_energy: f64,
    pub gradient_norm: f64,
    pub projected: bool,
    pub projection_iterations: usize,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct SolveTrace {
    pub entries: Vec<TraceEntry>,
}

impl SolveTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Tab-separated table with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("iteration\tx\ty\tz\tomega\tenergy\tgrad_norm\tprojected\tprojection_iters\n");
        for e in &self.entries {
            let b = &e.base;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                e.iteration,
                sig6(b.x),
                sig6(b.y),
                sig6(b.z),
                sig6(b.omega),
                sig6(e.expected_energy),
                sig6(e.gradient_norm),
                u8::from(e.projected),
                e.projection_iterations
            );
        }
        out
    }
}

fn restore_feasibility(
    constraint: &dyn EnergyFunction,
    config: &SolverConfig,
    c: &mut BaseConfig,
    fallback: (f64, f64),
) -> Result<(bool, usize)> {
    if constraint.membership_probability(&[c.x, c.y])? >= config.tau {
        return Ok((false, 0));
    }
    match project_to_boundary(constraint, [c.x, c.y], config.tau, config.project_iterations, config.epsilon) {
        Ok(proj) => {
            let ok = proj.converged
                || constraint.membership_probability(&proj.point)? >= feasibility_threshold(config.tau, config.epsilon);
            if ok {
                (c.x, c.y) = (proj.point[0], proj.point[1]);
            } else {
                (c.x, c.y) = fallback;
            }
            Ok((true, proj.iterations))
        }
        Err(Error::StationaryPoint { .. }) => {
            (c.x, c.y) = fallback;
            Ok((true, 0))
        }
        Err(e) => Err(e),
    }
}

/// Projected gradient ascent on the expected ROI energy from `initial`.
pub fn solve_mbpp(
    roi: &dyn EnergyFunction,
    constraint: Option<&dyn EnergyFunction>,
    chain: &KinematicChain,
    config: &SolverConfig,
    initial: BaseConfig,
) -> Result<(BaseConfig, SolveTrace)> {
    config.validate()?;
    if roi.input_dim() != 3 {
        return Err(Error::Shape { expected: 3, got: roi.input_dim() });
    }
    if let Some(g) = constraint {
        if g.input_dim() != 2 {
            return Err(Error::Shape { expected: 2, got: g.input_dim() });
        }
    }
    if !initial.is_finite() {
        return Err(Error::Config("initial placement must be finite".into()));
    }
    let mut c = initial;
    config.clamp_box(&mut c);
    if let Some(g) = constraint {
        let start = (c.x, c.y);
        restore_feasibility(g, config, &mut c, start)?;
        if !config.is_feasible(Some(g), &c)? {
            return Err(Error::Infeasible { attempts: 1 });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut local = Vec::new();
    let mut trace = SolveTrace::default();
    for t in 0..config.iterations {
        if t == 0 || config.resampling == Resampling::FreshPerStep {
            local.clear();
            for _ in 0..config.samples {
                let q = chain.random_joints(&mut rng);
                local.push(chain.local_position(&q)?);
            }
        }
        let (e, grad) = expected_energy_and_gradient_local(roi, &local, &c)?;
        let grad_norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !e.is_finite() || !grad_norm.is_finite() {
            return Err(Error::SolverDivergence { iteration: t });
        }
        let before = (c.x, c.y);
        c.x += config.step_size * grad[0];
        c.y += config.step_size * grad[1];
        c.z += config.step_size * grad[2];
        c.omega += config.step_size * grad[3];
        config.clamp_box(&mut c);
        let (projected, projection_iterations) = match constraint {
            Some(g) => restore_feasibility(g, config, &mut c, before)?,
            None => (false, 0),
        };
        trace.entries.push(TraceEntry { iteration: t, base: c, expected_energy: e, gradient_norm: grad_norm, projected, projection_iterations });
    }
    Ok((c, trace))
}

/// Uniform placement over `xy_region` and the z/omega boxes, redrawn until
/// the constraint membership reaches `tau`.
pub fn sample_feasible<R: Rng>(
    constraint: Option<&dyn EnergyFunction>,
    xy_region: &SamplingBox,
    config: &SolverConfig,
    rng: &mut R,
) -> Result<BaseConfig> {
    if xy_region.dim() != 2 {
        return Err(Error::Shape { expected: 2, got: xy_region.dim() });
    }
    let uniform = |rng: &mut R, lo: f64, hi: f64| if hi > lo { rng.random_range(lo..=hi) } else { lo };
    for _ in 0..MAX_REJECTIONS {
        let c = BaseConfig::new(
            uniform(rng, xy_region.lo[0], xy_region.hi[0]),
            uniform(rng, xy_region.lo[1], xy_region.hi[1]),
            uniform(rng, config.z_limits.0, config.z_limits.1),
            uniform(rng, config.omega_limits.0, config.omega_limits.1),
        );
        match constraint {
            Some(g) if g.membership_probability(&[c.x, c.y])? < config.tau => continue,
            _ => return Ok(c),
        }
    }
    Err(Error::Infeasible { attempts: MAX_REJECTIONS })
}

/// Region initial placements are drawn from: the constraint's training box
/// when constrained, else the ROI box grown by the arm's reach bound.
pub fn initial_region(roi: &EnergyModel, constraint: Option<&EnergyModel>, chain: &KinematicChain) -> SamplingBox {
    match constraint {
        Some(g) => g.domain().clone(),
        None => {
            let d = roi.domain();
            let r = chain.reach_bound();
            SamplingBox { lo: vec![d.lo[0] - r, d.lo[1] - r], hi: vec![d.hi[0] + r, d.hi[1] + r] }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultistartResult {
    pub best: BaseConfig,
    pub best_index: usize,
    /// Expected energy of every final placement on the shared evaluation set.
    pub scores: Vec<f64>,
    pub finals: Vec<BaseConfig>,
    pub initials: Vec<BaseConfig>,
    pub traces: Vec<SolveTrace>,
}

/// Seed for restart `r`; restart 0 uses the configured seed.
pub fn restart_seed(seed: u64, r: usize) -> u64 {
    if r == 0 {
        seed
    } else {
        seed ^ (r as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }
}

/// Runs [`solve_mbpp`] from `restarts` random feasible placements and keeps
/// the one with the highest expected energy on a shared sample set.
pub fn solve_multistart(
    roi: &dyn EnergyFunction,
    constraint: Option<&dyn EnergyFunction>,
    chain: &KinematicChain,
    config: &SolverConfig,
    restarts: usize,
    xy_region: &SamplingBox,
) -> Result<MultistartResult> {
    if restarts == 0 {
        return Err(Error::Config("restarts must be at least 1".into()));
    }
    config.validate()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut initials = Vec::with_capacity(restarts);
    for _ in 0..restarts {
        initials.push(sample_feasible(constraint, xy_region, config, &mut init_rng)?);
    }
    let mut finals = Vec::with_capacity(restarts);
    let mut traces = Vec::with_capacity(restarts);
    for (r, init) in initials.iter().enumerate() {
        let cfg = SolverConfig { seed: restart_seed(config.seed, r), ..config.clone() };
        let (fin, trace) = solve_mbpp(roi, constraint, chain, &cfg, *init)?;
        finals.push(fin);
        traces.push(trace);
    }
    let eval_local = chain.sample_local_positions(EVALUATION_SAMPLES, config.seed ^ EVALUATION_STREAM);
    let scores = finals.iter().map(|c| expected_energy_local(roi, &eval_local, c)).collect::<Result<Vec<_>>>()?;
    let best_index = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .expect("at least one restart");
    Ok(MultistartResult { best: finals[best_index], best_index, scores, finals, initials, traces })
}

#[cfg(test)]
mod tests;
