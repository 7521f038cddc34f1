use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::kinematics::{BaseConfig, KinematicChain};

/// Position error below which an IK solve counts as a success.
pub const IK_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_IK_ITERATIONS: usize = 100;
/// Random starts tried after the mid-limit start fails.
const IK_RESTARTS: usize = 3;
const DAMPING: f64 = 0.02;
const IK_SEED: u64 = 0x1c0de;

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub joints: Vec<f64>,
    pub error: f64,
    pub iterations: usize,
}

/// Damped least squares from `start`, clamping to the joint limits each
/// step. Returns the final joints and position error.
pub fn ik_refine(chain: &KinematicChain, target: &Vector3<f64>, base: &BaseConfig, start: &[f64], max_iterations: usize) -> IkSolution {
    let mut q = start.to_vec();
    let mut error = f64::INFINITY;
    let lambda2 = DAMPING * DAMPING;
    for it in 0..=max_iterations {
        let (p, jac) = chain.joint_jacobian(&q, base).expect("joints stay within limits");
        let e = target - p;
        error = e.norm();
        if error < IK_TOLERANCE || it == max_iterations {
            return IkSolution { joints: q, error, iterations: it };
        }
        let jjt: Matrix3<f64> = &jac * jac.transpose() + Matrix3::identity() * lambda2;
        let Some(inv) = jjt.try_inverse() else { break };
        let dq = jac.transpose() * (inv * e);
        for ((v, d), spec) in q.iter_mut().zip(dq.iter()).zip(chain.joints()) {
            *v = (*v + d).clamp(spec.limits.0, spec.limits.1);
        }
    }
    IkSolution { joints: q, error, iterations: max_iterations }
}

/// Position-only IK: mid-limit start, then a fixed set of seeded random
/// starts. Targets beyond the chain's reach bound fail immediately.
pub fn ik_solve(chain: &KinematicChain, target: &Vector3<f64>, base: &BaseConfig, max_iterations: usize) -> Option<IkSolution> {
    if !target.iter().all(|v| v.is_finite()) {
        return None;
    }
    let local = base.inverse_apply(target);
    if (local - chain.mount_origin()).norm() > chain.reach_bound() + IK_TOLERANCE {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(IK_SEED);
    let mut start = chain.midpoint();
    for attempt in 0..=IK_RESTARTS {
        if attempt > 0 {
            start = chain.random_joints(&mut rng);
        }
        let sol = ik_refine(chain, target, base, &start, max_iterations);
        if sol.error < IK_TOLERANCE {
            return Some(sol);
        }
    }
    None
}
