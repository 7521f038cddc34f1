use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::kinematics::{yaw_derivative, BaseConfig, KinematicChain};
use crate::sim::EnergyFunction;

/// Arm-frame end-effector positions for a set of joint vectors.
pub fn local_positions(chain: &KinematicChain, joints: &[Vec<f64>]) -> Result<Vec<Vector3<f64>>> {
    if joints.is_empty() {
        return Err(Error::Config("expected energy needs at least one joint sample".into()));
    }
    joints.iter().map(|q| chain.local_position(q)).collect()
}

fn world_points(local: &[Vector3<f64>], base: &BaseConfig) -> Vec<f64> {
    let mut xs = Vec::with_capacity(local.len() * 3);
    for p in local {
        xs.extend_from_slice(base.apply(p).as_slice());
    }
    xs
}

/// Mean energy over precomputed arm-frame positions.
pub fn expected_energy_local(model: &dyn EnergyFunction, local: &[Vector3<f64>], base: &BaseConfig) -> Result<f64> {
    check_model(model)?;
    if local.is_empty() {
        return Err(Error::Config("expected energy needs at least one joint sample".into()));
    }
    let e = model.energies(&world_points(local, base))?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// Mean energy and its gradient with respect to `(x, y, z, omega)`.
pub fn expected_energy_and_gradient_local(
    model: &dyn EnergyFunction,
    local: &[Vector3<f64>],
    base: &BaseConfig,
) -> Result<(f64, [f64; 4])> {
    check_model(model)?;
    if local.is_empty() {
        return Err(Error::Config("expected energy needs at least one joint sample".into()));
    }
    let (e, g) = model.energies_and_gradients(&world_points(local, base))?;
    let n = local.len() as f64;
    let mut grad = [0.0; 4];
    for (p, gi) in local.iter().zip(g.chunks_exact(3)) {
        let d = yaw_derivative(base.omega, p);
        grad[0] += gi[0];
        grad[1] += gi[1];
        grad[2] += gi[2];
        grad[3] += gi[0] * d.x + gi[1] * d.y;
    }
    grad.iter_mut().for_each(|v| *v /= n);
    Ok((e.iter().sum::<f64>() / n, grad))
}

fn check_model(model: &dyn EnergyFunction) -> Result<()> {
    if model.input_dim() != 3 {
        return Err(Error::Shape { expected: 3, got: model.input_dim() });
    }
    Ok(())
}

/// Monte-Carlo expected energy of the end effector over `joints`.
pub fn expected_energy(model: &dyn EnergyFunction, chain: &KinematicChain, base: &BaseConfig, joints: &[Vec<f64>]) -> Result<f64> {
    expected_energy_local(model, &local_positions(chain, joints)?, base)
}

/// Gradient of [`expected_energy`] with respect to `(x, y, z, omega)`.
pub fn expected_energy_gradient(
    model: &dyn EnergyFunction,
    chain: &KinematicChain,
    base: &BaseConfig,
    joints: &[Vec<f64>],
) -> Result<[f64; 4]> {
    expected_energy_and_gradient_local(model, &local_positions(chain, joints)?, base).map(|(_, g)| g)
}
