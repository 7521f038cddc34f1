//! Held-out log-likelihood comparison of KDE, GMMs and the energy model.

use std::fmt::{self, Write as _};
use std::time::Instant;

use crate::baselines::{default_bandwidth_grid, gmm_fit, kde_fit, mean_log_likelihood, EbmDensity, PARTITION_SAMPLES};
use crate::datasets::{generate_shape, ShapeKind, ShapeSpec, DEFAULT_SHAPE_COUNT};
use crate::error::{Error, Result};
use crate::format::sig6;
use crate::samples::Samples;
use crate::sim::{nce_fit, TrainConfig};

pub const DEFAULT_GMM_COMPONENTS: [usize; 3] = [10, 50, 100];
/// Added to the training seed to draw the test set.
pub const TEST_SEED_OFFSET: u64 = 0x5eed_0001;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityConfig {
    pub train: TrainConfig,
    pub gmm_components: Vec<usize>,
    pub train_count: usize,
    pub test_count: usize,
    pub partition_samples: usize,
    pub seed: u64,
}

/// Energy-model training used for the shape comparison.
pub fn density_train_config() -> TrainConfig {
    TrainConfig { learning_rate: 3e-3, batch_size: 64, epochs: 100, padding: 0.1, ..TrainConfig::default() }
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            train: density_train_config(),
            gmm_components: DEFAULT_GMM_COMPONENTS.to_vec(),
            train_count: DEFAULT_SHAPE_COUNT,
            test_count: 2000,
            partition_samples: PARTITION_SAMPLES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityMethod {
    Kde,
    Gmm(usize),
    Ebm,
}

impl fmt::Display for DensityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Kde => f.write_str("kde"),
            Self::Gmm(k) => write!(f, "gmm-{k}"),
            Self::Ebm => f.write_str("ebm"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityRow {
    pub method: DensityMethod,
    pub log_likelihood: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub shape: ShapeKind,
    pub rows: Vec<DensityRow>,
    pub kde_bandwidth: f64,
    pub log_partition: f64,
    pub log_partition_std_err: f64,
}

impl DensityReport {
    pub fn get(&self, method: DensityMethod) -> Option<f64> {
        self.rows.iter().find(|r| r.method == method).map(|r| r.log_likelihood)
    }

    /// Highest log-likelihood over the GMM rows.
    pub fn best_gmm(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| matches!(r.method, DensityMethod::Gmm(_)))
            .map(|r| r.log_likelihood)
            .reduce(f64::max)
    }

    /// Rows `shape, method, log_likelihood`; runtimes are left out so the
    /// table is reproducible.
    pub fn to_tsv(&self, with_header: bool) -> String {
        let mut out = String::new();
        if with_header {
            out.push_str("shape\tmethod\tlog_likelihood\n");
        }
        for r in &self.rows {
            let _ = writeln!(out, "{}\t{}\t{}", self.shape, r.method, sig6(r.log_likelihood));
        }
        out
    }

    pub fn runtimes_tsv(&self) -> String {
        let mut out = String::from("shape\tmethod\truntime_s\n");
        for r in &self.rows {
            let _ = writeln!(out, "{}\t{}\t{}", self.shape, r.method, sig6(r.runtime_s));
        }
        out
    }
}

/// Fits every method on one seeded draw of `kind` and scores it on a
/// second draw with a different seed.
pub fn compare_density(kind: ShapeKind, config: &DensityConfig) -> Result<DensityReport> {
    if config.test_count == 0 {
        return Err(Error::Config("test set must be non-empty".into()));
    }
    let draw = |count, seed| -> Result<Samples> {
        let spec = ShapeSpec { count, seed, ..ShapeSpec::new(kind, seed) };
        Ok(Samples::from(&generate_shape(&spec)?))
    };
    let train = draw(config.train_count, config.seed)?;
    let test = draw(config.test_count, config.seed.wrapping_add(TEST_SEED_OFFSET))?;
    let mut rows = Vec::with_capacity(config.gmm_components.len() + 2);

    let t = Instant::now();
    let kde = kde_fit(&train, &default_bandwidth_grid(&train), config.seed)?;
    let ll = mean_log_likelihood(&kde, &test)?;
    rows.push(DensityRow { method: DensityMethod::Kde, log_likelihood: ll, runtime_s: t.elapsed().as_secs_f64() });

    for &k in &config.gmm_components {
        let t = Instant::now();
        let gmm = gmm_fit(&train, k, config.seed)?;
        let ll = mean_log_likelihood(&gmm, &test)?;
        rows.push(DensityRow { method: DensityMethod::Gmm(k), log_likelihood: ll, runtime_s: t.elapsed().as_secs_f64() });
    }

    let t = Instant::now();
    let model = nce_fit(&train, &TrainConfig { seed: config.seed, ..config.train.clone() })?;
    let ebm = EbmDensity::estimate(&model, model.domain(), config.partition_samples, config.seed)?;
    let ll = ebm.mean_log_likelihood(&test)?;
    rows.push(DensityRow { method: DensityMethod::Ebm, log_likelihood: ll, runtime_s: t.elapsed().as_secs_f64() });

    Ok(DensityReport {
        shape: kind,
        rows,
        kde_bandwidth: kde.bandwidth(),
        log_partition: ebm.log_partition(),
        log_partition_std_err: ebm.log_partition_std_err(),
    })
}
