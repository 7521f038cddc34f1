use crate::error::{Error, Result};
use crate::sim::{logit, sigmoid, EnergyFunction};

/// Outcome of a boundary projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: [f64; 2],
    pub iterations: usize,
    pub converged: bool,
}

/// Gradient norms below this count as a stationary point.
pub const STATIONARY_GRADIENT: f64 = 1e-12;

/// Newton iteration of the 2D point `p` onto the level set
/// `G(p) = logit(tau)` of the constraint energy `G`.
pub fn project_to_boundary(
    constraint: &dyn EnergyFunction,
    p: [f64; 2],
    tau: f64,
    max_iterations: usize,
    epsilon: f64,
) -> Result<Projection> {
    if constraint.input_dim() != 2 {
        return Err(Error::Shape { expected: 2, got: constraint.input_dim() });
    }
    if !(tau > 0.0 && tau < 1.0) || !(epsilon > 0.0) {
        return Err(Error::Config(format!("projection needs tau in (0, 1) and epsilon > 0, got {tau}, {epsilon}")));
    }
    let target = logit(tau);
    let mut p = p;
    for k in 0..=max_iterations {
        let (e, g) = constraint.energies_and_gradients(&p)?;
        let residual = e[0] - target;
        if residual.abs() <= epsilon {
            return Ok(Projection { point: p, iterations: k, converged: true });
        }
        if k == max_iterations {
            break;
        }
        let norm2 = g[0] * g[0] + g[1] * g[1];
        if norm2.sqrt() < STATIONARY_GRADIENT {
            return Err(Error::StationaryPoint { x: p[0], y: p[1] });
        }
        p = [p[0] - g[0] / norm2 * residual, p[1] - g[1] / norm2 * residual];
    }
    Ok(Projection { point: p, iterations: max_iterations, converged: false })
}

/// Lowest membership probability accepted as feasible: `sigmoid(logit(tau) - epsilon)`.
pub fn feasibility_threshold(tau: f64, epsilon: f64) -> f64 {
    sigmoid(logit(tau) - epsilon)
}
