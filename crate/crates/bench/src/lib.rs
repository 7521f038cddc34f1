//! Fixtures shared by the benchmarks.

use sdi_core::datasets::{generate_shape, ShapeKind, ShapeSpec};
use sdi_core::kinematics::{BaseConfig, KinematicChain};
use sdi_core::sim::nce_fit;
use sdi_core::{EnergyModel, Samples, TrainConfig};

/// Star dataset with `count` points.
pub fn star_points(count: usize) -> Samples {
    let spec = ShapeSpec { count, ..ShapeSpec::new(ShapeKind::Star, 0) };
    Samples::from(&generate_shape(&spec).expect("valid shape"))
}

/// Default-width energy model after a few epochs on the star dataset.
pub fn trained_model() -> EnergyModel {
    nce_fit(&star_points(2000), &TrainConfig { epochs: 3, ..TrainConfig::default() }).expect("training succeeds")
}

pub fn arm() -> KinematicChain {
    KinematicChain::bundled_arm()
}

pub fn base() -> BaseConfig {
    BaseConfig::new(-0.4, 0.1, 0.3, 0.5)
}
