use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::kinematics::{BaseConfig, KinematicChain};

pub const DEFAULT_FK_SAMPLES: usize = 100_000;
pub const DEFAULT_TOLERANCE: f64 = 0.02;

/// Arm-frame end-effector samples hashed on a grid with cell size equal to
/// the tolerance, so a query inspects at most 27 cells. The first sample is
/// always the mid-limit configuration; the rest are uniform.
#[derive(Debug, Clone)]
pub struct ReachabilityIndex {
    tolerance: f64,
    cells: HashMap<[i32; 3], Vec<Vector3<f64>>>,
    samples: usize,
}

impl ReachabilityIndex {
    pub fn new(chain: &KinematicChain, samples: usize, tolerance: f64, seed: u64) -> Result<Self> {
        if !(tolerance > 0.0) {
            return Err(Error::Config("coverage tolerance must be positive".into()));
        }
        if samples == 0 {
            return Err(Error::Config("coverage needs at least one FK sample".into()));
        }
        let mut cells: HashMap<[i32; 3], Vec<Vector3<f64>>> = HashMap::new();
        let anchor = chain.local_position(&chain.midpoint())?;
        let rest = chain.sample_local_positions(samples - 1, seed);
        for p in std::iter::once(anchor).chain(rest) {
            cells.entry(cell(&p, tolerance)).or_default().push(p);
        }
        Ok(Self { tolerance, cells, samples })
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Whether some sampled end-effector position lies within the tolerance
    /// of the arm-frame point `local`.
    pub fn reaches_local(&self, local: &Vector3<f64>) -> bool {
        let c = cell(local, self.tolerance);
        let t2 = self.tolerance * self.tolerance;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(pts) = self.cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        if pts.iter().any(|p| (p - local).norm_squared() <= t2) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    pub fn reaches(&self, base: &BaseConfig, world: &Vector3<f64>) -> bool {
        self.reaches_local(&base.inverse_apply(world))
    }

    /// Fraction of `roi` reachable from `base`.
    pub fn coverage(&self, base: &BaseConfig, roi: &[Vector3<f64>]) -> Result<f64> {
        if roi.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let hit = roi.iter().filter(|p| self.reaches(base, p)).count();
        Ok(hit as f64 / roi.len() as f64)
    }
}

fn cell(p: &Vector3<f64>, size: f64) -> [i32; 3] {
    [(p.x / size).floor() as i32, (p.y / size).floor() as i32, (p.z / size).floor() as i32]
}

/// Fraction of `roi` within `tolerance` of one of `samples` seeded FK positions.
pub fn coverage(
    chain: &KinematicChain,
    base: &BaseConfig,
    roi: &[Vector3<f64>],
    samples: usize,
    tolerance: f64,
    seed: u64,
) -> Result<f64> {
    ReachabilityIndex::new(chain, samples, tolerance, seed)?.coverage(base, roi)
}
