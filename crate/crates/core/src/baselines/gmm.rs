use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::samples::Samples;

use super::{log_sum_exp, Density};

/// Added to every covariance diagonal after each M-step.
pub const COVARIANCE_REGULARIZATION: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 500;
/// Stop once the mean per-sample log-likelihood improves by less than this.
pub const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Row-major `d x d`.
    pub covariance: Vec<f64>,
}

/// Full-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    dim: usize,
    components: Vec<Component>,
    // Cached per component: lower Cholesky factor and ln(w) - ln|2 pi Sigma|/2.
    chol: Vec<Vec<f64>>,
    log_norm: Vec<f64>,
}

impl GmmModel {
    pub fn new(dim: usize, components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("mixture needs at least one component".into()));
        }
        let mut chol = Vec::with_capacity(components.len());
        let mut log_norm = Vec::with_capacity(components.len());
        for c in &components {
            if c.mean.len() != dim || c.covariance.len() != dim * dim {
                return Err(Error::Shape { expected: dim, got: c.mean.len() });
            }
            let l = cholesky(&c.covariance, dim)
                .ok_or_else(|| Error::BaselineFailure("covariance is not positive definite".into()))?;
            let log_det: f64 = (0..dim).map(|i| l[i * dim + i].ln()).sum::<f64>() * 2.0;
            log_norm.push(c.weight.ln() - 0.5 * (dim as f64 * (2.0 * std::f64::consts::PI).ln() + log_det));
            chol.push(l);
        }
        Ok(Self { dim, components, chol, log_norm })
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// `ln(w_k N(x | mu_k, Sigma_k))` for every component.
    fn component_log_densities(&self, x: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let d = self.dim;
        for (k, c) in self.components.iter().enumerate() {
            if c.weight <= 0.0 {
                out[k] = f64::NEG_INFINITY;
                continue;
            }
            let l = &self.chol[k];
            let mut maha = 0.0;
            for i in 0..d {
                let mut s = x[i] - c.mean[i];
                for j in 0..i {
                    s -= l[i * d + j] * scratch[j];
                }
                scratch[i] = s / l[i * d + i];
                maha += scratch[i] * scratch[i];
            }
            out[k] = self.log_norm[k] - 0.5 * maha;
        }
    }
}

impl Density for GmmModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let mut out = vec![0.0; self.k()];
        let mut scratch = vec![0.0; self.dim];
        self.component_log_densities(x, &mut out, &mut scratch);
        log_sum_exp(out.iter().copied())
    }
}

fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Result of an EM run.
#[derive(Debug, Clone)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Mean per-sample log-likelihood evaluated before each M-step.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// k-means++ seeding: first center uniform, the rest with probability
/// proportional to squared distance from the nearest chosen center.
pub fn kmeans_pp<R: Rng>(points: &Samples, k: usize, rng: &mut R) -> Vec<usize> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.rows().map(|p| sq_dist(p, points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut t = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if t < w {
                    pick = i;
                    break;
                }
                t -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        let c = points.row(next).to_vec();
        for (i, p) in points.rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &c));
        }
    }
    chosen
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Weighted M-step. `resp` is `n x k` row-major.
fn m_step(points: &Samples, resp: &[f64], k: usize, fallback: &[Component]) -> Vec<Component> {
    let d = points.dim();
    let n = points.len();
    (0..k)
        .map(|j| {
            let nk: f64 = (0..n).map(|i| resp[i * k + j]).sum();
            if nk < 1e-10 {
                // A component with no support keeps its shape and drops out.
                return Component { weight: 0.0, ..fallback[j].clone() };
            }
            let mut mean = vec![0.0; d];
            for (i, p) in points.rows().enumerate() {
                let r = resp[i * k + j];
                for a in 0..d {
                    mean[a] += r * p[a];
                }
            }
            mean.iter_mut().for_each(|m| *m /= nk);
            let mut cov = vec![0.0; d * d];
            for (i, p) in points.rows().enumerate() {
                let r = resp[i * k + j];
                for a in 0..d {
                    let da = p[a] - mean[a];
                    for b in 0..=a {
                        cov[a * d + b] += r * da * (p[b] - mean[b]);
                    }
                }
            }
            for a in 0..d {
                for b in 0..=a {
                    cov[a * d + b] /= nk;
                    cov[b * d + a] = cov[a * d + b];
                }
                cov[a * d + a] += COVARIANCE_REGULARIZATION;
            }
            Component { weight: nk / n as f64, mean, covariance: cov }
        })
        .collect()
}

/// Fits `k` components by EM with k-means++ initialization.
pub fn gmm_fit_with_history(points: &Samples, k: usize, seed: u64) -> Result<GmmFit> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if points.len() < k {
        return Err(Error::InsufficientData { needed: k, got: points.len() });
    }
    let (n, d) = (points.len(), points.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = kmeans_pp(points, k, &mut rng);

    // Hard assignment to the nearest seed gives the initial responsibilities.
    let mut resp = vec![0.0; n * k];
    for (i, p) in points.rows().enumerate() {
        let nearest = (0..k)
            .min_by(|&a, &b| sq_dist(p, points.row(centers[a])).total_cmp(&sq_dist(p, points.row(centers[b]))))
            .expect("k >= 1");
        resp[i * k + nearest] = 1.0;
    }
    let global = m_step(points, &vec![1.0; n], 1, &[]).remove(0);
    let seeds: Vec<Component> = centers
        .iter()
        .map(|&c| Component { weight: 1.0 / k as f64, mean: points.row(c).to_vec(), covariance: global.covariance.clone() })
        .collect();
    let mut model = GmmModel::new(d, m_step(points, &resp, k, &seeds))?;

    let mut history = Vec::new();
    let mut converged = false;
    let mut logp = vec![0.0; k];
    let mut scratch = vec![0.0; d];
    for _ in 0..MAX_ITERATIONS {
        let mut total = 0.0;
        for (i, p) in points.rows().enumerate() {
            model.component_log_densities(p, &mut logp, &mut scratch);
            let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let row = &mut resp[i * k..(i + 1) * k];
            let mut sum = 0.0;
            for (r, &l) in row.iter_mut().zip(&logp) {
                *r = (l - max).exp();
                sum += *r;
            }
            total += max + sum.ln();
            row.iter_mut().for_each(|r| *r /= sum);
        }
        let ll = total / n as f64;
        if !ll.is_finite() {
            return Err(Error::BaselineFailure("EM log-likelihood is not finite".into()));
        }
        let gain = history.last().map(|&prev| ll - prev);
        history.push(ll);
        if gain.is_some_and(|g| g < TOLERANCE) {
            converged = true;
            break;
        }
        model = GmmModel::new(d, m_step(points, &resp, k, model.components()))?;
    }
    Ok(GmmFit { model, history, converged })
}

pub fn gmm_fit(points: &Samples, k: usize, seed: u64) -> Result<GmmModel> {
    gmm_fit_with_history(points, k, seed).map(|f| f.model)
}
