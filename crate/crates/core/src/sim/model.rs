use ndarray::Array2;

use crate::error::{Error, Result};
use crate::samples::Samples;

use super::mlp::{sigmoid, Mlp};
use super::train::SamplingBox;

/// Rows evaluated per network call; bounds peak memory on large batches.
const EVAL_CHUNK: usize = 4096;

/// Anything that maps points to a scalar energy, optionally with its
/// gradient. Implemented by trained models and by analytic fields.
pub trait EnergyFunction: Send + Sync {
    fn input_dim(&self) -> usize;

    /// Energies of the row-major points in `xs`.
    fn energies(&self, xs: &[f64]) -> Result<Vec<f64>>;

    /// Energies plus row-major gradients with respect to each point.
    fn energies_and_gradients(&self, xs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>;

    fn energy(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.input_dim(), x.len())?;
        Ok(self.energies(x)?[0])
    }

    /// `P(x in region) = sigmoid(E(x))`.
    fn membership_probability(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.energy(x)?))
    }
}

fn check_dim(dim: usize, len: usize) -> Result<()> {
    if len != dim {
        return Err(Error::Shape { expected: dim, got: len });
    }
    Ok(())
}

fn check_rows(dim: usize, len: usize) -> Result<usize> {
    if len == 0 || len % dim != 0 {
        return Err(Error::Shape { expected: dim, got: len });
    }
    Ok(len / dim)
}

/// Per-axis affine map applied before the network: `(x - center) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    /// Scales below this floor (meters) are clamped so flat point sets
    /// do not blow up the normalized coordinates.
    pub const MIN_SCALE: f64 = 1e-2;

    pub fn identity(dim: usize) -> Self {
        Self { center: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    /// Zero mean, unit per-axis standard deviation.
    pub fn fit(points: &Samples) -> Self {
        let scale = points.std_dev().into_iter().map(|s| s.max(Self::MIN_SCALE)).collect();
        Self { center: points.mean(), scale }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn apply(&self, xs: &[f64]) -> Array2<f64> {
        let d = self.dim();
        Array2::from_shape_fn((xs.len() / d, d), |(i, k)| (xs[i * d + k] - self.center[k]) / self.scale[k])
    }

    pub fn apply_f32(&self, xs: &[f64]) -> Array2<f32> {
        let d = self.dim();
        Array2::from_shape_fn((xs.len() / d, d), |(i, k)| ((xs[i * d + k] - self.center[k]) / self.scale[k]) as f32)
    }
}

/// A trained spatial instruction map: energy network plus input normalizer.
///
/// Parameters are stored in single precision; evaluation runs in double
/// precision on a widened copy.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    net: Mlp<f32>,
    eval_net: Mlp<f64>,
    normalizer: Normalizer,
    domain: SamplingBox,
}

impl PartialEq for EnergyModel {
    fn eq(&self, other: &Self) -> bool {
        self.net == other.net && self.normalizer == other.normalizer && self.domain == other.domain
    }
}

impl EnergyModel {
    /// `domain` is the box the negatives were drawn from.
    pub fn new(net: Mlp<f32>, normalizer: Normalizer, domain: SamplingBox) -> Result<Self> {
        if !matches!(net.input_dim(), 2 | 3) {
            return Err(Error::Config(format!("energy models take 2D or 3D input, got {}", net.input_dim())));
        }
        if normalizer.dim() != net.input_dim() || normalizer.scale.len() != net.input_dim() {
            return Err(Error::Shape { expected: net.input_dim(), got: normalizer.dim() });
        }
        if domain.dim() != net.input_dim() {
            return Err(Error::Shape { expected: net.input_dim(), got: domain.dim() });
        }
        if net.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite()))
            || normalizer.center.iter().chain(&normalizer.scale).any(|v| !v.is_finite())
            || normalizer.scale.iter().any(|&s| s <= 0.0)
        {
            return Err(Error::Config("model parameters must be finite with positive scales".into()));
        }
        let eval_net = net.cast();
        Ok(Self { net, eval_net, normalizer, domain })
    }

    pub fn network(&self) -> &Mlp<f32> {
        &self.net
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn domain(&self) -> &SamplingBox {
        &self.domain
    }

    /// Energy of a single point.
    pub fn energy(&self, x: &[f64]) -> Result<f64> {
        EnergyFunction::energy(self, x)
    }

    pub fn membership_probability(&self, x: &[f64]) -> Result<f64> {
        EnergyFunction::membership_probability(self, x)
    }
}

impl EnergyFunction for EnergyModel {
    fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn energies(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let d = self.input_dim();
        check_rows(d, xs.len())?;
        let mut out = Vec::with_capacity(xs.len() / d);
        for chunk in xs.chunks(EVAL_CHUNK * d) {
            let z = self.normalizer.apply(chunk);
            out.extend(self.eval_net.forward(z.view())?);
        }
        Ok(out)
    }

    fn energies_and_gradients(&self, xs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.input_dim();
        let n = check_rows(d, xs.len())?;
        let mut energies = Vec::with_capacity(n);
        let mut grads = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(EVAL_CHUNK * d) {
            let z = self.normalizer.apply(chunk);
            let (e, dz) = self.eval_net.forward_input_grad(z.view())?;
            energies.extend(e);
            for row in dz.rows() {
                grads.extend(row.iter().zip(&self.normalizer.scale).map(|(g, s)| g / s));
            }
        }
        Ok((energies, grads))
    }
}

/// `E(x) = c` everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantField {
    pub dim: usize,
    pub value: f64,
}

impl EnergyFunction for ConstantField {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn energies(&self, xs: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![self.value; check_rows(self.dim, xs.len())?])
    }

    fn energies_and_gradients(&self, xs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = check_rows(self.dim, xs.len())?;
        Ok((vec![self.value; n], vec![0.0; xs.len()]))
    }
}

/// `E(x) = a . x + b`.
#[derive(Debug, Clone)]
pub struct AffineField {
    pub slope: Vec<f64>,
    pub offset: f64,
}

impl EnergyFunction for AffineField {
    fn input_dim(&self) -> usize {
        self.slope.len()
    }

    fn energies(&self, xs: &[f64]) -> Result<Vec<f64>> {
        check_rows(self.slope.len(), xs.len())?;
        Ok(xs
            .chunks_exact(self.slope.len())
            .map(|x| x.iter().zip(&self.slope).map(|(a, b)| a * b).sum::<f64>() + self.offset)
            .collect())
    }

    fn energies_and_gradients(&self, xs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let e = self.energies(xs)?;
        let g = self.slope.iter().copied().cycle().take(xs.len()).collect();
        Ok((e, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(dim: usize, seed: u64) -> EnergyModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::init(&[dim, 256, 256, 1], &mut rng).unwrap();
        let normalizer = Normalizer { center: vec![0.1; dim], scale: vec![0.5; dim] };
        EnergyModel::new(net, normalizer, SamplingBox::cube(dim, 1.0)).unwrap()
    }

    #[test]
    fn zero_output_layer_gives_zero_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::<f32>::init(&[3, 16, 16, 1], &mut rng).unwrap();
        let last = net.layers_mut().last_mut().unwrap();
        last.weight.fill(0.0);
        last.bias.fill(0.0);
        let model = EnergyModel::new(net, Normalizer::identity(3), SamplingBox::cube(3, 1.0)).unwrap();
        assert_eq!(model.energy(&[0.3, -2.0, 7.0]).unwrap(), 0.0);
        assert_eq!(model.membership_probability(&[0.3, -2.0, 7.0]).unwrap(), 0.5);
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let model = random_model(3, 2);
        let x = [0.2, 0.4, -0.1];
        assert_eq!(model.energy(&x).unwrap().to_bits(), model.energy(&x).unwrap().to_bits());
        assert!(matches!(model.energy(&[1.0, 2.0]), Err(Error::Shape { .. })));
        assert!(model.energies(&[1.0, 2.0, 3.0, 4.0]).is_err());
    }

    #[test]
    fn probability_of_log_19_is_point_95() {
        let field = ConstantField { dim: 2, value: 19f64.ln() };
        assert!((field.membership_probability(&[0.0, 0.0]).unwrap() - 0.95).abs() < 1e-15);
    }

    #[test]
    fn probability_is_monotone_in_energy() {
        let model = random_model(2, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let a = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let b = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let (ea, eb) = (model.energy(&a).unwrap(), model.energy(&b).unwrap());
            let (pa, pb) = (model.membership_probability(&a).unwrap(), model.membership_probability(&b).unwrap());
            if ea > eb {
                assert!(pa >= pb);
            }
            assert!(pa > 0.0 && pa < 1.0);
        }
    }

    fn check_input_gradients(dim: usize) {
        let model = random_model(dim, 11 + dim as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let xs: Vec<f64> = (0..100 * dim).map(|_| rng.random_range(-1.5..1.5)).collect();
        let (_, grads) = model.energies_and_gradients(&xs).unwrap();
        let h = 1e-4;
        for i in 0..100 {
            for k in 0..dim {
                let mut plus = xs[i * dim..(i + 1) * dim].to_vec();
                let mut minus = plus.clone();
                plus[k] += h;
                minus[k] -= h;
                let fd = (model.energy(&plus).unwrap() - model.energy(&minus).unwrap()) / (2.0 * h);
                let g = grads[i * dim + k];
                let rel = (fd - g).abs() / fd.abs().max(g.abs()).max(1e-6);
                assert!(rel <= 1e-3, "point {i} axis {k}: analytic {g} vs fd {fd}");
            }
        }
    }

    #[test]
    fn input_gradients_3d() {
        check_input_gradients(3);
    }

    #[test]
    fn input_gradients_2d() {
        check_input_gradients(2);
    }

    #[test]
    fn affine_field_gradient() {
        let f = AffineField { slope: vec![1.0, -2.0], offset: 0.5 };
        let (e, g) = f.energies_and_gradients(&[1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(e, vec![-0.5, 0.5]);
        assert_eq!(g, vec![1.0, -2.0, 1.0, -2.0]);
    }

    #[test]
    fn rejects_nonfinite_parameters() {
        let mut net = Mlp::<f32>::zeros(&[2, 4, 1]).unwrap();
        net.layers_mut()[0].bias[0] = f32::NAN;
        assert!(EnergyModel::new(net, Normalizer::identity(2), SamplingBox::cube(2, 1.0)).is_err());
    }
}
