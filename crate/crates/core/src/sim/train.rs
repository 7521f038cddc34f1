use ndarray::{concatenate, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::samples::Samples;

use super::adamw::{adamw_step, AdamWState};
use super::mlp::{sigmoid, softplus, Mlp};
use super::model::{EnergyModel, Normalizer};

/// Smallest point set the trainer accepts.
pub const MIN_TRAINING_POINTS: usize = 16;

/// Half-width added to an axis along which the data has no extent.
pub const ZERO_EXTENT_PAD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Positive samples per step.
    pub batch_size: usize,
    pub epochs: usize,
    /// Negative box grows by `padding * extent` on each side of every axis.
    pub padding: f64,
    /// Negatives drawn per positive.
    pub negative_ratio: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            batch_size: 512,
            epochs: 200,
            padding: 0.5,
            negative_ratio: 1.0,
            hidden: vec![256, 256],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight decay must be non-negative".into()));
        }
        if !(self.negative_ratio > 0.0) {
            return Err(Error::Config("negative ratio must be positive".into()));
        }
        if !(self.padding >= 0.0) {
            return Err(Error::Config("padding must be non-negative".into()));
        }
        if self.batch_size == 0 || self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("batch size and hidden widths must be positive".into()));
        }
        Ok(())
    }
}

/// Axis-aligned box the negatives are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SamplingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Shape { expected: lo.len(), got: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
            return Err(Error::Config("box corners must be finite with lo <= hi".into()));
        }
        Ok(Self { lo, hi })
    }

    /// `[-half, half]^dim`.
    pub fn cube(dim: usize, half: f64) -> Self {
        Self { lo: vec![-half; dim], hi: vec![half; dim] }
    }

    /// Bounding box of `points` grown by `padding` times the extent of each
    /// axis; axes with zero extent grow by [`ZERO_EXTENT_PAD`] instead.
    pub fn around(points: &Samples, padding: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if !(padding >= 0.0) {
            return Err(Error::Config("padding must be non-negative".into()));
        }
        let (mut lo, mut hi) = points.bounds();
        for k in 0..points.dim() {
            let extent = hi[k] - lo[k];
            let grow = if extent > 0.0 { padding * extent } else { ZERO_EXTENT_PAD };
            lo[k] -= grow;
            hi[k] += grow;
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// The box grown by `margin` on every side.
    pub fn grown(&self, margin: f64) -> Self {
        Self { lo: self.lo.iter().map(|v| v - margin).collect(), hi: self.hi.iter().map(|v| v + margin).collect() }
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| v >= l && v <= h)
    }

    pub fn sample<R: Rng>(&self, count: usize, rng: &mut R) -> Samples {
        let d = self.dim();
        let mut data = Vec::with_capacity(count * d);
        for _ in 0..count {
            for k in 0..d {
                data.push(if self.hi[k] > self.lo[k] { rng.random_range(self.lo[k]..self.hi[k]) } else { self.lo[k] });
            }
        }
        Samples::new(d, data).expect("box sample has box dimension")
    }
}

/// Uniform draws from the padded bounding box of `points`.
pub fn sample_negatives(points: &Samples, count: usize, padding: f64, seed: u64) -> Result<Samples> {
    let bx = SamplingBox::around(points, padding)?;
    Ok(bx.sample(count, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Binary cross-entropy of positives against negatives, averaged per
/// positive, plus the gradient with respect to each energy.
fn nce_loss(energies: &Array1<f32>, n_pos: usize) -> (f32, Array1<f32>) {
    let scale = 1.0 / n_pos as f32;
    let mut loss = 0.0f32;
    let grad = energies
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            if i < n_pos {
                loss += softplus(-e);
                (sigmoid(e) - 1.0) * scale
            } else {
                loss += softplus(e);
                sigmoid(e) * scale
            }
        })
        .collect();
    (loss * scale, grad)
}

/// Noise-contrastive trainer for one energy model.
pub struct Trainer {
    config: TrainConfig,
    normalizer: Normalizer,
    negatives_box: SamplingBox,
    positives: Array2<f32>,
    net: Mlp<f32>,
    state: AdamWState<f32>,
    rng: ChaCha8Rng,
    losses: Vec<f32>,
}

impl Trainer {
    pub fn new(points: &Samples, config: TrainConfig) -> Result<Self> {
        let negatives_box = SamplingBox::around(points, config.padding)?;
        Self::build(points, config, Normalizer::fit(points), negatives_box)
    }

    /// Trainer drawing negatives from a caller-chosen box; inputs are
    /// normalized to the box rather than to the positives.
    pub fn with_box(points: &Samples, config: TrainConfig, negatives_box: SamplingBox) -> Result<Self> {
        if negatives_box.dim() != points.dim() {
            return Err(Error::Shape { expected: points.dim(), got: negatives_box.dim() });
        }
        let normalizer = Normalizer {
            center: negatives_box.center(),
            scale: negatives_box.lo.iter().zip(&negatives_box.hi).map(|(l, h)| (0.5 * (h - l)).max(Normalizer::MIN_SCALE)).collect(),
        };
        Self::build(points, config, normalizer, negatives_box)
    }

    fn build(points: &Samples, config: TrainConfig, normalizer: Normalizer, negatives_box: SamplingBox) -> Result<Self> {
        config.validate()?;
        if points.len() < MIN_TRAINING_POINTS {
            return Err(Error::InsufficientData { needed: MIN_TRAINING_POINTS, got: points.len() });
        }
        if !matches!(points.dim(), 2 | 3) {
            return Err(Error::Config(format!("energy models take 2D or 3D input, got {}", points.dim())));
        }
        let positives = normalizer.apply_f32(points.as_slice());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let sizes: Vec<usize> = std::iter::once(points.dim()).chain(config.hidden.iter().copied()).chain([1]).collect();
        let net = Mlp::init(&sizes, &mut rng)?;
        Ok(Self { config, normalizer, negatives_box, positives, net, state: AdamWState::default(), rng, losses: Vec::new() })
    }

    pub fn negatives_box(&self) -> &SamplingBox {
        &self.negatives_box
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    /// Mean loss per finished epoch.
    pub fn epoch_losses(&self) -> &[f32] {
        &self.losses
    }

    /// Normalizes world-frame points into network input.
    pub fn normalize(&self, points: &Samples) -> Array2<f32> {
        self.normalizer.apply_f32(points.as_slice())
    }

    /// Loss on a batch without updating.
    pub fn loss(&self, positives: &Array2<f32>, negatives: &Array2<f32>) -> Result<f32> {
        let x = concatenate(Axis(0), &[positives.view(), negatives.view()]).map_err(|e| Error::Config(e.to_string()))?;
        let e = self.net.forward(x.view())?;
        Ok(nce_loss(&e, positives.nrows()).0)
    }

    /// One AdamW step on the given batch; returns the loss before the step.
    pub fn step(&mut self, positives: &Array2<f32>, negatives: &Array2<f32>) -> Result<f32> {
        let x = concatenate(Axis(0), &[positives.view(), negatives.view()]).map_err(|e| Error::Config(e.to_string()))?;
        let (e, cache) = self.net.forward_cached(x.view())?;
        let (loss, d_e) = nce_loss(&e, positives.nrows());
        let (grads, _) = self.net.backward(&cache, d_e.view(), true, false);
        let grads = grads.expect("parameter gradients requested");
        let mask = self.net.decay_mask();
        let grad_tensors = grads.tensors();
        adamw_step(
            &mut self.net.tensors_mut(),
            &grad_tensors,
            &mask,
            &mut self.state,
            self.config.learning_rate as f32,
            self.config.weight_decay as f32,
        )?;
        Ok(loss)
    }

    /// One pass over the positives with freshly drawn negatives.
    pub fn run_epoch(&mut self) -> Result<f32> {
        let epoch = self.losses.len();
        let n = self.positives.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.rng);
        let n_neg = ((n as f64) * self.config.negative_ratio).round().max(1.0) as usize;
        let negatives = self.negatives_box.sample(n_neg, &mut self.rng);
        let negatives = self.normalizer.apply_f32(negatives.as_slice());

        let mut total = 0.0f64;
        let mut batches = 0usize;
        let mut neg_cursor = 0usize;
        for chunk in order.chunks(self.config.batch_size) {
            let pos = self.positives.select(Axis(0), chunk);
            let want = ((chunk.len() as f64) * self.config.negative_ratio).round().max(1.0) as usize;
            let idx: Vec<usize> = (0..want).map(|k| (neg_cursor + k) % n_neg).collect();
            neg_cursor = (neg_cursor + want) % n_neg;
            let neg = negatives.select(Axis(0), &idx);
            let loss = self.step(&pos, &neg)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            total += loss as f64;
            batches += 1;
        }
        let mean = (total / batches as f64) as f32;
        self.losses.push(mean);
        Ok(mean)
    }

    pub fn train(mut self) -> Result<EnergyModel> {
        for _ in 0..self.config.epochs {
            self.run_epoch()?;
        }
        self.finish()
    }

    pub fn finish(self) -> Result<EnergyModel> {
        EnergyModel::new(self.net, self.normalizer, self.negatives_box)
    }
}

/// Fits an energy model to `points` by noise-contrastive estimation against
/// uniform negatives from the padded bounding box.
pub fn nce_fit(points: &Samples, config: &TrainConfig) -> Result<EnergyModel> {
    Trainer::new(points, config.clone())?.train()
}

/// [`nce_fit`] with negatives drawn from `negatives_box` instead of the
/// padded bounding box.
pub fn nce_fit_in(points: &Samples, config: &TrainConfig, negatives_box: SamplingBox) -> Result<EnergyModel> {
    Trainer::with_box(points, config.clone(), negatives_box)?.train()
}
