//! Density baselines and likelihood scoring.

mod gmm;
mod kde;

pub use gmm::{gmm_fit, gmm_fit_with_history, kmeans_pp, Component, GmmFit, GmmModel, COVARIANCE_REGULARIZATION};
pub use kde::{bandwidth_scores, data_scale, default_bandwidth_grid, kde_fit, log_spaced, KdeModel};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::samples::Samples;
use crate::sim::{EnergyFunction, SamplingBox};

/// Number of uniform samples used to estimate the EBM partition function.
pub const PARTITION_SAMPLES: usize = 200_000;

/// A normalized density over `R^d`.
pub trait Density {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
}

/// `ln(sum(exp(v)))`, `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean log-likelihood of `test` under `model`.
pub fn mean_log_likelihood(model: &dyn Density, test: &Samples) -> Result<f64> {
    if test.dim() != model.dim() {
        return Err(Error::Shape { expected: model.dim(), got: test.dim() });
    }
    if test.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    Ok(test.rows().map(|x| model.log_density(x)).sum::<f64>() / test.len() as f64)
}

/// Energy model normalized by an importance-sampled partition function
/// `Z = integral over the box of exp(E(x)) dx`.
pub struct EbmDensity<'a, F: EnergyFunction + ?Sized> {
    model: &'a F,
    log_partition: f64,
    log_partition_std_err: f64,
}

impl<'a, F: EnergyFunction + ?Sized> EbmDensity<'a, F> {
    /// Estimates `ln Z` with `samples` uniform draws from `region`.
    pub fn estimate(model: &'a F, region: &SamplingBox, samples: usize, seed: u64) -> Result<Self> {
        if region.dim() != model.input_dim() {
            return Err(Error::Shape { expected: model.input_dim(), got: region.dim() });
        }
        if samples == 0 {
            return Err(Error::Config("partition estimate needs samples".into()));
        }
        let draws = region.sample(samples, &mut ChaCha8Rng::seed_from_u64(seed));
        let energies = model.energies(draws.as_slice())?;
        let lse = log_sum_exp(energies.iter().copied());
        let n = samples as f64;
        let log_partition = region.volume().ln() + lse - n.ln();
        // Delta-method standard error of ln Z from the relative spread of the weights.
        let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rel: Vec<f64> = energies.iter().map(|e| (e - max).exp()).collect();
        let m = rel.iter().sum::<f64>() / n;
        let var = rel.iter().map(|w| (w - m) * (w - m)).sum::<f64>() / (n - 1.0).max(1.0);
        let std_err = (var / n).sqrt() / m;
        if !log_partition.is_finite() {
            return Err(Error::BaselineFailure("partition estimate is not finite".into()));
        }
        Ok(Self { model, log_partition, log_partition_std_err: std_err })
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    /// Approximate standard error of `log_partition`.
    pub fn log_partition_std_err(&self) -> f64 {
        self.log_partition_std_err
    }

    pub fn mean_log_likelihood(&self, test: &Samples) -> Result<f64> {
        if test.dim() != self.model.input_dim() {
            return Err(Error::Shape { expected: self.model.input_dim(), got: test.dim() });
        }
        if test.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let e = self.model.energies(test.as_slice())?;
        Ok(e.iter().sum::<f64>() / e.len() as f64 - self.log_partition)
    }
}

impl<F: EnergyFunction + ?Sized> Density for EbmDensity<'_, F> {
    fn dim(&self) -> usize {
        self.model.input_dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.model.energies(x).map(|e| e[0] - self.log_partition).unwrap_or(f64::NAN)
    }
}
