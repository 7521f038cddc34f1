use crate::error::{Error, Result};

use super::mlp::Scalar;

/// Moment accumulators for decoupled-weight-decay Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState<T> {
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
    step: u64,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> Default for AdamWState<T> {
    fn default() -> Self {
        Self {
            first: Vec::new(),
            second: Vec::new(),
            step: 0,
            beta1: T::from_f64(0.9).unwrap(),
            beta2: T::from_f64(0.999).unwrap(),
            eps: T::from_f64(1e-8).unwrap(),
        }
    }
}

impl<T: Scalar> AdamWState<T> {
    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<T>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Vec<T>] {
        &self.second
    }
}

/// One AdamW update over a list of parameter tensors.
///
/// `decay[i]` selects whether tensor `i` receives weight decay (biases do
/// not). Moments are allocated on the first call and must keep the same
/// shapes afterwards.
pub fn adamw_step<T: Scalar>(
    params: &mut [&mut [T]],
    grads: &[&[T]],
    decay: &[bool],
    state: &mut AdamWState<T>,
    lr: T,
    weight_decay: T,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != decay.len() {
        return Err(Error::Shape { expected: params.len(), got: grads.len().min(decay.len()) });
    }
    for (p, g) in params.iter().zip(grads) {
        if p.len() != g.len() {
            return Err(Error::Shape { expected: p.len(), got: g.len() });
        }
    }
    if state.first.is_empty() {
        state.first = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        state.second = state.first.clone();
    } else if state.first.len() != params.len() || state.first.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len()) {
        return Err(Error::Shape { expected: state.first.len(), got: params.len() });
    }

    state.step += 1;
    let one = T::one();
    let t = state.step as i32;
    let bc1 = one - state.beta1.powi(t);
    let bc2 = one - state.beta2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i];
        let m = &mut state.first[i];
        let v = &mut state.second[i];
        let shrink = if decay[i] { one - lr * weight_decay } else { one };
        for k in 0..p.len() {
            m[k] = state.beta1 * m[k] + (one - state.beta1) * g[k];
            v[k] = state.beta2 * v[k] + (one - state.beta2) * g[k] * g[k];
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            p[k] = p[k] * shrink - lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = vec![0.5f64, -1.5];
        let mut state = AdamWState::default();
        for _ in 0..5 {
            adamw_step(&mut [&mut p[..]], &[&[0.0, 0.0]], &[true], &mut state, 0.1, 0.0).unwrap();
        }
        assert_eq!(p, vec![0.5, -1.5]);
        assert!(state.first_moments()[0].iter().all(|&m| m == 0.0));
        assert_eq!(state.step_count(), 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = vec![1.0f64];
        let mut state = AdamWState::default();
        adamw_step(&mut [&mut p[..]], &[&[1.0]], &[true], &mut state, 0.1, 0.0).unwrap();
        // m_hat = v_hat = 1, so the step is lr / (1 + eps).
        assert!((p[0] - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn decay_only_shrinks_weights_not_biases() {
        let mut w = vec![2.0f64];
        let mut b = vec![2.0f64];
        let mut state = AdamWState::default();
        let (lr, wd) = (0.1, 0.5);
        for _ in 0..3 {
            adamw_step(&mut [&mut w[..], &mut b[..]], &[&[0.0], &[0.0]], &[true, false], &mut state, lr, wd).unwrap();
        }
        assert!((w[0] - 2.0 * (1.0f64 - lr * wd).powi(3)).abs() < 1e-15);
        assert_eq!(b[0], 2.0);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![1.0f32, 2.0];
        let mut state = AdamWState::default();
        assert!(adamw_step(&mut [&mut p[..]], &[&[1.0]], &[true], &mut state, 0.1, 0.0).is_err());
        adamw_step(&mut [&mut p[..]], &[&[1.0, 1.0]], &[true], &mut state, 0.1, 0.0).unwrap();
        let mut q = vec![1.0f32; 3];
        assert!(adamw_step(&mut [&mut q[..]], &[&[1.0, 1.0, 1.0]], &[true], &mut state, 0.1, 0.0).is_err());
    }
}
