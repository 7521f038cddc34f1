use super::*;
use crate::sim::{AffineField, ConstantField};
use std::f64::consts::PI;

fn arm() -> KinematicChain {
    KinematicChain::bundled_arm()
}

#[test]
fn unreachable_roi_has_zero_coverage() {
    let chain = arm();
    let base = BaseConfig::new(0.0, 0.0, 0.3, 0.0);
    let far = chain.reach_bound() + 0.02 + 0.5;
    let roi = vec![Vector3::new(far, 0.0, 0.3), Vector3::new(0.0, -far, 0.4)];
    assert_eq!(coverage(&chain, &base, &roi, 20_000, 0.02, 0).unwrap(), 0.0);
}

#[test]
fn midpoint_target_is_covered() {
    let chain = arm();
    let base = BaseConfig::new(0.4, -0.2, 0.25, 1.0);
    let p = chain.forward(&chain.midpoint(), &base).unwrap();
    // The FK index is sampled; the midpoint must be found among 1e5 samples.
    let index = ReachabilityIndex::new(&chain, DEFAULT_FK_SAMPLES, 0.01, 0).unwrap();
    assert_eq!(index.coverage(&base, &[p]).unwrap(), 1.0);
}

#[test]
fn coverage_monotone_in_tolerance() {
    let chain = arm();
    let base = BaseConfig::new(0.0, 0.0, 0.3, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let roi: Vec<Vector3<f64>> =
        (0..300).map(|_| Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..1.2))).collect();
    let mut last = 0.0;
    for delta in [0.005, 0.01, 0.02, 0.04, 0.08] {
        let c = coverage(&chain, &base, &roi, 20_000, delta, 3).unwrap();
        assert!(c >= last);
        last = c;
    }
    assert!(coverage(&chain, &base, &[], 10, 0.02, 0).is_err());
}

#[test]
fn ik_recovers_known_configurations() {
    let chain = arm();
    let base = BaseConfig::new(0.3, 0.1, 0.3, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut ok = 0;
    for _ in 0..50 {
        let q0 = chain.random_joints(&mut rng);
        let target = chain.forward(&q0, &base).unwrap();
        if let Some(sol) = ik_solve(&chain, &target, &base, DEFAULT_IK_ITERATIONS) {
            ok += 1;
            assert!((chain.forward(&sol.joints, &base).unwrap() - target).norm() < IK_TOLERANCE);
            chain.check(&sol.joints).unwrap();
        }
    }
    assert!(ok >= 48, "{ok} of 50");
}

#[test]
fn ik_fails_out_of_reach() {
    let chain = arm();
    let target = Vector3::new(10.0 * chain.reach_bound(), 0.0, 0.5);
    assert!(ik_solve(&chain, &target, &BaseConfig::default(), DEFAULT_IK_ITERATIONS).is_none());
}

#[test]
fn ik_refine_respects_limits() {
    let chain = arm();
    let target = Vector3::new(0.0, 0.0, 5.0);
    let sol = ik_refine(&chain, &target, &BaseConfig::default(), &chain.midpoint(), 50);
    chain.check(&sol.joints).unwrap();
    assert!(sol.error > IK_TOLERANCE);
}

#[test]
fn random_baseline_feasible_and_seeded() {
    // Feasible half-plane x <= 0.2 inside a [-1, 1]^2 region.
    let constraint = AffineField { slope: vec![-30.0, 0.0], offset: 6.0 + 19f64.ln() };
    let region = SamplingBox::cube(2, 1.0);
    let solver = SolverConfig::default();
    for seed in 0..200 {
        let c = random_baseline(Some(&constraint), &region, &solver, seed).unwrap();
        assert!(solver.is_feasible(Some(&constraint), &c).unwrap());
        assert!((0.0..=2.0 * PI).contains(&c.omega));
    }
    assert_eq!(
        random_baseline(Some(&constraint), &region, &solver, 9).unwrap(),
        random_baseline(Some(&constraint), &region, &solver, 9).unwrap()
    );
    let nowhere = ConstantField { dim: 2, value: -9.0 };
    assert!(matches!(random_baseline(Some(&nowhere), &region, &solver, 0), Err(Error::Infeasible { .. })));
}

#[test]
fn random_baseline_uniform_over_region() {
    // Feasible square [-0.5, 0.5]^2 inside [-1, 1]^2: sharp walls on all sides.
    struct Square;
    impl EnergyFunction for Square {
        fn input_dim(&self) -> usize {
            2
        }
        fn energies(&self, xs: &[f64]) -> Result<Vec<f64>> {
            Ok(xs.chunks_exact(2).map(|p| if p[0].abs() <= 0.5 && p[1].abs() <= 0.5 { 10.0 } else { -10.0 }).collect())
        }
        fn energies_and_gradients(&self, xs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
            Ok((self.energies(xs)?, vec![0.0; xs.len()]))
        }
    }
    let region = SamplingBox::cube(2, 1.0);
    let solver = SolverConfig::default();
    let mut counts = [0usize; 16];
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..n {
        let c = sample_feasible(Some(&Square), &region, &solver, &mut rng).unwrap();
        let i = (((c.x + 0.5) * 4.0).floor() as usize).min(3);
        let j = (((c.y + 0.5) * 4.0).floor() as usize).min(3);
        counts[i * 4 + j] += 1;
    }
    let expected = n as f64 / 16.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // Chi-square critical value for 15 degrees of freedom at p = 0.01.
    assert!(chi2 < 30.578, "chi2 = {chi2}");
}

#[test]
fn subsample_is_seeded_and_bounded() {
    let pts: Vec<Vector3<f64>> = (0..50).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
    assert_eq!(test_subsample(&pts, 100, 0).len(), 50);
    let a = test_subsample(&pts, 10, 3);
    assert_eq!(a.len(), 10);
    assert_eq!(a, test_subsample(&pts, 10, 3));
}

#[test]
fn report_table_has_one_row_per_method() {
    let report = ReachabilityReport {
        scene: "x".into(),
        methods: vec![
            MethodResult { method: Method::Random, coverage: 0.1, runtime_s: 0.001, placement: BaseConfig::default() },
            MethodResult { method: Method::Ik, coverage: 0.5, runtime_s: 1.0, placement: BaseConfig::default() },
            MethodResult { method: Method::Ours, coverage: 0.75, runtime_s: 0.5, placement: BaseConfig::default() },
        ],
        test_points: 10,
        fk_samples: 10,
        tolerance: 0.02,
        seed: 0,
    };
    let tsv = report.to_tsv(true);
    assert_eq!(tsv.lines().count(), 4);
    assert!(tsv.contains("x\tours\t75\t0.5\t0\t0\t0\t0"));
}
