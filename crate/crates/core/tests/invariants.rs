use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdi_core::datasets::{generate_shape, ShapeKind, ShapeSpec};
use sdi_core::kinematics::{BaseConfig, KinematicChain};
use sdi_core::sim::{nce_fit, AffineField, SamplingBox};
use sdi_core::solver::{sample_feasible, solve_mbpp, SolverConfig};
use sdi_core::{EnergyModel, Samples, TrainConfig};

fn model() -> &'static EnergyModel {
    static MODEL: OnceLock<EnergyModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let points = Samples::from(&generate_shape(&ShapeSpec::new(ShapeKind::Star, 0)).unwrap());
        nce_fit(&points, &TrainConfig { hidden: vec![32, 32], epochs: 5, ..TrainConfig::default() }).unwrap()
    })
}

fn arm() -> &'static KinematicChain {
    static ARM: OnceLock<KinematicChain> = OnceLock::new();
    ARM.get_or_init(KinematicChain::bundled_arm)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probability_is_bounded_and_ordered_like_energy(
        a in prop::array::uniform3(-1.0f64..1.0),
        b in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let m = model();
        let (pa, pb) = (m.membership_probability(&a).unwrap(), m.membership_probability(&b).unwrap());
        prop_assert!((0.0..=1.0).contains(&pa) && (0.0..=1.0).contains(&pb));
        let (ea, eb) = (m.energy(&a).unwrap(), m.energy(&b).unwrap());
        if ea > eb {
            prop_assert!(pa >= pb);
        }
    }

    #[test]
    fn sampled_joints_respect_limits(seed in any::<u64>(), count in 1usize..200) {
        let arm = arm();
        for q in arm.sample_joints(count, seed) {
            prop_assert_eq!(q.len(), arm.dof());
            for (v, j) in q.iter().zip(arm.joints()) {
                prop_assert!(*v >= j.limits.0 && *v <= j.limits.1);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solver_trace_stays_feasible(
        seed in any::<u64>(),
        slope in prop::array::uniform3(-3.0f64..3.0),
        edge in -0.5f64..0.5,
        z0 in 0.1f64..0.3,
        dz in 0.0f64..0.3,
        w0 in -3.0f64..0.0,
        dw in 0.0f64..3.0,
    ) {
        let roi = AffineField { slope: slope.to_vec(), offset: 0.0 };
        let constraint = AffineField { slope: vec![-10.0, 0.0], offset: 10.0 * edge + 19f64.ln() };
        let config = SolverConfig {
            samples: 32,
            iterations: 15,
            step_size: 0.05,
            z_limits: (z0, z0 + dz),
            omega_limits: (w0, w0 + dw),
            seed,
            ..SolverConfig::default()
        };
        let region = SamplingBox::cube(2, 1.0);
        let initial = sample_feasible(Some(&constraint), &region, &config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let (fin, trace) = solve_mbpp(&roi, Some(&constraint), arm(), &config, initial).unwrap();
        prop_assert_eq!(trace.len(), config.iterations);
        for e in trace.entries.iter().map(|e| &e.base).chain(std::iter::once(&fin)) {
            prop_assert!(config.is_feasible(Some(&constraint), e).unwrap(), "{:?}", e);
            prop_assert!(e.z >= config.z_limits.0 && e.z <= config.z_limits.1);
            prop_assert!(e.omega >= config.omega_limits.0 && e.omega <= config.omega_limits.1);
        }
        let again = solve_mbpp(&roi, Some(&constraint), arm(), &config, initial).unwrap();
        prop_assert_eq!(again.0, fin);
    }

    #[test]
    fn moving_base_translates_expected_energy_of_affine_field(
        slope in prop::array::uniform3(-3.0f64..3.0),
        dx in -1.0f64..1.0,
        dy in -1.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let roi = AffineField { slope: slope.to_vec(), offset: 0.5 };
        let joints = arm().sample_joints(16, seed);
        let a = BaseConfig::new(0.0, 0.0, 0.2, 0.3);
        let b = BaseConfig::new(dx, dy, 0.2, 0.3);
        let ea = sdi_core::solver::expected_energy(&roi, arm(), &a, &joints).unwrap();
        let eb = sdi_core::solver::expected_energy(&roi, arm(), &b, &joints).unwrap();
        prop_assert!((eb - ea - (slope[0] * dx + slope[1] * dy)).abs() < 1e-9);
    }
}
