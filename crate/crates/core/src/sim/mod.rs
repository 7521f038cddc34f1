//! Spatial instruction maps: energy networks trained by noise-contrastive
//! estimation so that `sigmoid(E(x))` estimates region membership.

mod adamw;
mod io;
mod mlp;
mod model;
mod train;

pub use adamw::{adamw_step, AdamWState};
pub use io::{read_model, write_model, MODEL_FORMAT_VERSION};
pub use mlp::{Dense, ForwardCache, Mlp, Scalar};
pub use model::{AffineField, ConstantField, EnergyFunction, EnergyModel, Normalizer};
pub use train::{
    nce_fit, nce_fit_in, sample_negatives, SamplingBox, TrainConfig, Trainer, MIN_TRAINING_POINTS, ZERO_EXTENT_PAD,
};

/// Logistic function.
pub fn sigmoid(x: f64) -> f64 {
    mlp::sigmoid(x)
}

/// Inverse of [`sigmoid`]: `ln(p / (1 - p))`.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logit_of_point_95_is_ln_19() {
        assert!((logit(0.95) - 19f64.ln()).abs() <= 1e-12);
        assert!((sigmoid(19f64.ln()) - 0.95).abs() <= 1e-15);
    }
}
