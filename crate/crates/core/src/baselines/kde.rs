use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::samples::Samples;

use super::{log_sum_exp, Density};

const HELD_OUT_FRACTION: f64 = 0.2;

/// Isotropic Gaussian kernel density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeModel {
    points: Samples,
    bandwidth: f64,
    /// Set when the training data had no spread, so likelihood tuning could
    /// not pick a meaningful bandwidth.
    degenerate: bool,
}

impl KdeModel {
    pub fn new(points: Samples, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Config(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        Ok(Self { points, bandwidth, degenerate: false })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Density for KdeModel {
    fn dim(&self) -> usize {
        self.points.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let inv = -0.5 / (self.bandwidth * self.bandwidth);
        let terms = self.points.rows().map(|p| sq_dist(p, x) * inv);
        log_sum_exp(terms) - (self.points.len() as f64).ln() - log_norm(self.dim(), self.bandwidth)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// `ln((2 pi h^2)^(d/2))`.
fn log_norm(dim: usize, h: f64) -> f64 {
    0.5 * dim as f64 * (2.0 * std::f64::consts::PI * h * h).ln()
}

/// Overall spread used to scale the bandwidth grid: root mean per-axis variance.
pub fn data_scale(points: &Samples) -> f64 {
    let sd = points.std_dev();
    (sd.iter().map(|s| s * s).sum::<f64>() / sd.len() as f64).sqrt()
}

/// Twenty log-spaced bandwidths spanning `[0.01, 1.0]` times the data scale.
/// Data without spread falls back to a 1 m scale.
pub fn default_bandwidth_grid(points: &Samples) -> Vec<f64> {
    let scale = data_scale(points);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    log_spaced(0.01 * scale, scale, 20)
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Mean held-out log-likelihood for every bandwidth in `grid`.
pub fn bandwidth_scores(points: &Samples, grid: &[f64], seed: u64) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::Config("bandwidth grid is empty".into()));
    }
    if points.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: points.len() });
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_held = ((points.len() as f64 * HELD_OUT_FRACTION).round() as usize).clamp(1, points.len() - 1);
    let held = points.select(&order[..n_held]);
    let train = points.select(&order[n_held..]);

    // Squared distances are shared by every bandwidth.
    let d2: Vec<Vec<f64>> = held.rows().map(|x| train.rows().map(|p| sq_dist(p, x)).collect()).collect();
    let ln_n = (train.len() as f64).ln();
    Ok(grid
        .iter()
        .map(|&h| {
            let inv = -0.5 / (h * h);
            let norm = log_norm(points.dim(), h);
            d2.iter().map(|row| log_sum_exp(row.iter().map(|v| v * inv)) - ln_n - norm).sum::<f64>() / held.len() as f64
        })
        .collect())
}

/// Picks the grid bandwidth with the best held-out likelihood on a seeded
/// 80/20 split, then refits on all points.
pub fn kde_fit(points: &Samples, grid: &[f64], seed: u64) -> Result<KdeModel> {
    let scores = bandwidth_scores(points, grid, seed)?;
    let (lo, hi) = points.bounds();
    if lo == hi {
        let h = grid.iter().copied().fold(f64::INFINITY, f64::min);
        let mut model = KdeModel::new(points.clone(), h)?;
        model.degenerate = true;
        return Ok(model);
    }
    let best = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| grid[i])
        .expect("grid is non-empty");
    KdeModel::new(points.clone(), best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn single_point_peak() {
        let h = 0.3;
        let kde = KdeModel::new(Samples::from_rows(3, [[1.0, 2.0, 3.0]]).unwrap(), h).unwrap();
        let expected = -1.5 * (2.0 * std::f64::consts::PI * h * h).ln();
        assert!((kde.log_density(&[1.0, 2.0, 3.0]) - expected).abs() < 1e-12);
    }

    #[test]
    fn identical_points_are_degenerate() {
        let pts = Samples::from_rows(2, vec![[0.5, 0.5]; 10]).unwrap();
        let grid = default_bandwidth_grid(&pts);
        let kde = kde_fit(&pts, &grid, 0).unwrap();
        assert!(kde.is_degenerate());
        assert_eq!(kde.bandwidth(), grid[0]);
    }

    #[test]
    fn empty_grid_is_config_error() {
        let pts = Samples::from_rows(1, [[0.0], [1.0]]).unwrap();
        assert!(matches!(kde_fit(&pts, &[], 0), Err(Error::Config(_))));
    }

    #[test]
    fn bandwidth_near_silverman_for_normal_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 10_000;
        let data: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let pts = Samples::new(1, data).unwrap();
        // Silverman's rule for d = 1: 1.06 sigma n^(-1/5); sigma = sample std.
        let sigma = pts.std_dev()[0];
        let silverman = 1.06 * sigma * (n as f64).powf(-0.2);
        let grid = log_spaced(0.02, 2.0, 21);
        assert!(grid.iter().any(|&h| (h - 0.2).abs() < 1e-12));
        let kde = kde_fit(&pts, &grid, 3).unwrap();
        // Held-out likelihood is nearly flat around its peak, so the pick is
        // allowed to land anywhere within a factor of two.
        let step = (grid[1] / grid[0]).ln();
        assert!(
            (kde.bandwidth().ln() - silverman.ln()).abs() <= 3.0 * step + 1e-9,
            "picked {} vs silverman {silverman}",
            kde.bandwidth()
        );
    }

    #[test]
    fn held_out_likelihood_is_unimodal_for_two_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        for c in [-3.0, 3.0] {
            for _ in 0..400 {
                rows.push([c + 0.3 * rng.sample::<f64, _>(StandardNormal), 0.3 * rng.sample::<f64, _>(StandardNormal)]);
            }
        }
        let pts = Samples::from_rows(2, rows).unwrap();
        let grid = default_bandwidth_grid(&pts);
        let scores = bandwidth_scores(&pts, &grid, 1).unwrap();
        let peak = scores.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(scores[..=peak].windows(2).all(|w| w[0] <= w[1]));
        assert!(scores[peak..].windows(2).all(|w| w[0] >= w[1]));
    }
}
