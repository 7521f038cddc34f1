use super::*;
use crate::sim::{AffineField, ConstantField, Mlp, Normalizer};
use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

/// `E(x) = -|x - c|^2 / s`, a smooth bump peaked at `c`.
struct Bump {
    center: Vec<f64>,
    s: f64,
}

impl EnergyFunction for Bump {
    fn input_dim(&self) -> usize {
        self.center.len()
    }

    fn energies(&self, xs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.energies_and_gradients(xs)?.0)
    }

    fn energies_and_gradients(&self, xs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.center.len();
        let mut e = Vec::new();
        let mut g = Vec::new();
        for row in xs.chunks_exact(d) {
            let mut acc = 0.0;
            for (v, c) in row.iter().zip(&self.center) {
                acc += (v - c) * (v - c);
                g.push(-2.0 * (v - c) / self.s);
            }
            e.push(-acc / self.s);
        }
        Ok((e, g))
    }
}

fn random_model(dim: usize, seed: u64) -> EnergyModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = Mlp::init(&[dim, 64, 64, 1], &mut rng).unwrap();
    let normalizer = Normalizer { center: vec![0.2; dim], scale: vec![0.3; dim] };
    EnergyModel::new(net, normalizer, SamplingBox::cube(dim, 2.0)).unwrap()
}

#[test]
fn constant_model_objective() {
    let arm = KinematicChain::bundled_arm();
    let joints = arm.sample_joints(64, 1);
    let field = ConstantField { dim: 3, value: -1.25 };
    let base = BaseConfig::new(0.3, -0.2, 0.3, 1.0);
    assert_eq!(expected_energy(&field, &arm, &base, &joints).unwrap(), -1.25);
    assert_eq!(expected_energy_gradient(&field, &arm, &base, &joints).unwrap(), [0.0; 4]);
}

#[test]
fn single_sample_is_exact() {
    let arm = KinematicChain::bundled_arm();
    let model = random_model(3, 4);
    let joints = arm.sample_joints(1, 9);
    let base = BaseConfig::new(0.1, 0.2, 0.3, 0.4);
    let direct = model.energy(arm.forward(&joints[0], &base).unwrap().as_slice()).unwrap();
    assert_eq!(expected_energy(&model, &arm, &base, &joints).unwrap(), direct);
}

#[test]
fn empty_samples_rejected() {
    let arm = KinematicChain::bundled_arm();
    let field = ConstantField { dim: 3, value: 0.0 };
    assert!(matches!(expected_energy(&field, &arm, &BaseConfig::default(), &[]), Err(Error::Config(_))));
}

#[test]
fn linear_energy_gradient_is_slope() {
    let arm = KinematicChain::bundled_arm();
    let a = [0.7, -1.3, 2.1];
    let field = AffineField { slope: a.to_vec(), offset: 0.4 };
    for seed in 0..5 {
        let joints = arm.sample_joints(32, seed);
        let g = expected_energy_gradient(&field, &arm, &BaseConfig::new(0.0, 1.0, 0.2, seed as f64), &joints).unwrap();
        for k in 0..3 {
            assert!((g[k] - a[k]).abs() <= 1e-14, "{g:?}");
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let arm = KinematicChain::bundled_arm();
    let model = random_model(3, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..20 {
        let joints = arm.sample_joints(64, case);
        let base = BaseConfig::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.15..0.42),
            rng.random_range(0.0..TAU),
        );
        let g = expected_energy_gradient(&model, &arm, &base, &joints).unwrap();
        let h = 1e-5;
        let mut fd = [0.0; 4];
        for k in 0..4 {
            let (mut p, mut m) = (base.as_array(), base.as_array());
            p[k] += h;
            m[k] -= h;
            fd[k] = (expected_energy(&model, &arm, &BaseConfig::from_array(p), &joints).unwrap()
                - expected_energy(&model, &arm, &BaseConfig::from_array(m), &joints).unwrap())
                / (2.0 * h);
        }
        let err = (0..4).map(|k| (g[k] - fd[k]).powi(2)).sum::<f64>().sqrt();
        let norm = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err <= 1e-4 * norm, "case {case}: {g:?} vs {fd:?}");
    }
}

#[test]
fn logit_of_threshold() {
    assert!((crate::sim::logit(0.95) - 19f64.ln()).abs() <= 1e-12);
    assert!((crate::sim::logit(0.95) - 2.9444).abs() < 1e-4);
}

#[test]
fn projection_early_exit() {
    let field = AffineField { slope: vec![1.0, 0.0], offset: 0.0 };
    let p = [19f64.ln() + 5e-4, 3.0];
    let proj = project_to_boundary(&field, p, 0.95, 20, 1e-3).unwrap();
    assert_eq!(proj, Projection { point: p, iterations: 0, converged: true });
}

#[test]
fn projection_is_exact_for_affine_fields() {
    let field = AffineField { slope: vec![2.0, -0.5], offset: 1.0 };
    for p in [[-3.0, 4.0], [10.0, 10.0], [0.0, 0.0]] {
        let proj = project_to_boundary(&field, p, 0.95, 20, 1e-3).unwrap();
        assert_eq!(proj.iterations, 1);
        assert!(proj.converged);
        let g = 2.0 * proj.point[0] - 0.5 * proj.point[1] + 1.0;
        assert!((g - 19f64.ln()).abs() < 1e-12);
    }
}

#[test]
fn projection_stationary_point() {
    let field = ConstantField { dim: 2, value: -4.0 };
    assert!(matches!(project_to_boundary(&field, [1.0, 2.0], 0.95, 20, 1e-3), Err(Error::StationaryPoint { .. })));
}

#[test]
fn projection_reports_nonconvergence() {
    let field = Bump { center: vec![0.0, 0.0], s: 0.1 };
    // Level logit(0.95) lies above the bump's maximum of 0: unreachable.
    let proj = project_to_boundary(&field, [0.3, 0.2], 0.95, 5, 1e-3).unwrap();
    assert!(!proj.converged);
    assert_eq!(proj.iterations, 5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn projection_is_idempotent(seed in 0u64..1000, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let model = random_model(2, seed);
        let eps = 1e-3;
        if let Ok(first) = project_to_boundary(&model, [x, y], 0.95, 20, eps) {
            if first.converged {
                let second = project_to_boundary(&model, first.point, 0.95, 20, eps).unwrap();
                let moved = ((second.point[0] - first.point[0]).powi(2) + (second.point[1] - first.point[1]).powi(2)).sqrt();
                prop_assert!(moved < eps);
                prop_assert_eq!(second.iterations, 0);
            }
        }
    }
}

#[test]
fn yaw_pinned_when_limits_collapse() {
    let arm = KinematicChain::bundled_arm();
    let roi = Bump { center: vec![0.8, 0.3, 0.6], s: 0.5 };
    let config = SolverConfig { omega_limits: (0.0, 0.0), samples: 64, ..SolverConfig::default() };
    let (fin, trace) = solve_mbpp(&roi, None, &arm, &config, BaseConfig::new(0.0, 0.0, 0.3, 1.0)).unwrap();
    assert_eq!(trace.len(), config.iterations);
    assert!(trace.entries.iter().all(|e| e.base.omega == 0.0));
    assert_eq!(fin.omega, 0.0);
}

#[test]
fn fixed_samples_small_step_is_monotone() {
    let arm = KinematicChain::bundled_arm();
    let roi = random_model(3, 8);
    let config =
        SolverConfig { step_size: 5e-4, resampling: Resampling::Fixed, samples: 256, omega_limits: (-100.0, 100.0), ..SolverConfig::default() };
    let (_, trace) = solve_mbpp(&roi, None, &arm, &config, BaseConfig::new(0.4, -0.3, 0.3, 2.0)).unwrap();
    for w in trace.entries.windows(2) {
        assert!(w[1].expected_energy >= w[0].expected_energy - 1e-12);
    }
}

#[test]
fn constrained_trace_stays_feasible() {
    let arm = KinematicChain::bundled_arm();
    let roi = Bump { center: vec![2.0, 0.0, 0.7], s: 0.5 };
    // Feasible half-plane x <= 0.5 with a steep edge.
    let constraint = AffineField { slope: vec![-20.0, 0.0], offset: 10.0 + 19f64.ln() };
    let config = SolverConfig { samples: 64, step_size: 0.05, ..SolverConfig::default() };
    let (fin, trace) = solve_mbpp(&roi, Some(&constraint), &arm, &config, BaseConfig::new(-1.0, 0.0, 0.3, 1.0)).unwrap();
    for e in &trace.entries {
        assert!(config.is_feasible(Some(&constraint), &e.base).unwrap(), "{e:?}");
    }
    assert!(trace.entries.iter().any(|e| e.projected));
    assert!((fin.x - 0.5).abs() < 0.01);
}

#[test]
fn multistart_single_restart_matches_direct_solve() {
    let arm = KinematicChain::bundled_arm();
    let roi = Bump { center: vec![0.5, 0.5, 0.6], s: 0.4 };
    let config = SolverConfig { samples: 32, iterations: 10, seed: 7, ..SolverConfig::default() };
    let region = SamplingBox::cube(2, 1.0);
    let ms = solve_multistart(&roi, None, &arm, &config, 1, &region).unwrap();
    let (direct, trace) = solve_mbpp(&roi, None, &arm, &config, ms.initials[0]).unwrap();
    assert_eq!(ms.best, direct);
    assert_eq!(ms.traces[0], trace);
    let again = solve_multistart(&roi, None, &arm, &config, 3, &region).unwrap();
    let twice = solve_multistart(&roi, None, &arm, &config, 3, &region).unwrap();
    assert_eq!(again.finals, twice.finals);
    assert_eq!(again.best_index, twice.best_index);
}

#[test]
fn infeasible_region_is_reported() {
    let arm = KinematicChain::bundled_arm();
    let roi = Bump { center: vec![0.0, 0.0, 0.6], s: 0.4 };
    let nowhere = ConstantField { dim: 2, value: -10.0 };
    let config = SolverConfig { samples: 8, iterations: 2, ..SolverConfig::default() };
    let err = solve_multistart(&roi, Some(&nowhere), &arm, &config, 2, &SamplingBox::cube(2, 1.0)).unwrap_err();
    assert!(matches!(err, Error::Infeasible { attempts: MAX_REJECTIONS }));
}

#[test]
fn trace_table_shape() {
    let arm = KinematicChain::bundled_arm();
    let roi = Bump { center: vec![0.5, 0.5, 0.6], s: 0.4 };
    let config = SolverConfig { samples: 16, iterations: 5, ..SolverConfig::default() };
    let (_, trace) = solve_mbpp(&roi, None, &arm, &config, BaseConfig::new(0.0, 0.0, 0.3, 1.0)).unwrap();
    let tsv = trace.to_tsv();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines.iter().all(|l| l.split('\t').count() == 9));
}
