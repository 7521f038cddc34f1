//! Fully connected network with smooth (SiLU) hidden activations and a
//! scalar linear output, with hand-written backpropagation.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, NdFloat};
use num_traits::FromPrimitive;
use rand::Rng;

use crate::error::{Error, Result};

pub trait Scalar: NdFloat + FromPrimitive {}
impl Scalar for f32 {}
impl Scalar for f64 {}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub(crate) fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn silu<T: Scalar>(a: T) -> T {
    a * sigmoid(a)
}

#[inline]
fn silu_grad<T: Scalar>(a: T) -> T {
    let s = sigmoid(a);
    s * (T::one() + a * (T::one() - s))
}

/// One affine layer; `weight` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { weight: Array2::zeros((outputs, inputs)), bias: Array1::zeros(outputs) }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }
}

/// Activations kept from a forward pass for backpropagation.
pub struct ForwardCache<T> {
    /// Input to each layer.
    inputs: Vec<Array2<T>>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Array2<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<Dense<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// Network with layer widths `sizes = [input, hidden.., 1]`, all zero.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) || *sizes.last().unwrap() != 1 {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self { layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect() })
    }

    /// Uniform fan-in initialization: every weight and bias of a layer with
    /// `k` inputs is drawn from `U(-1/sqrt(k), 1/sqrt(k))`.
    pub fn init<R: Rng>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs() as f64).sqrt();
            for w in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
                *w = T::from_f64(rng.random_range(-bound..bound)).unwrap();
            }
        }
        Ok(net)
    }

    pub fn from_layers(layers: Vec<Dense<T>>) -> Result<Self> {
        if layers.is_empty() || layers.last().unwrap().outputs() != 1 {
            return Err(Error::Config("network must end in a single output".into()));
        }
        for w in layers.windows(2) {
            if w[0].outputs() != w[1].inputs() {
                return Err(Error::Shape { expected: w[0].outputs(), got: w[1].inputs() });
            }
        }
        if layers.iter().any(|l| l.bias.len() != l.outputs()) {
            return Err(Error::Config("bias length does not match layer width".into()));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    /// `[input, hidden.., 1]`.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(Dense::outputs)).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self { layers: self.layers.iter().map(|l| Dense::zeros(l.inputs(), l.outputs())).collect() }
    }

    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        let conv = |x: &T| U::from_f64(x.to_f64().unwrap()).unwrap();
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense { weight: l.weight.map(conv), bias: l.bias.map(conv) })
                .collect(),
        }
    }

    /// Parameter tensors in declaration order (weight, bias, weight, ...).
    pub fn tensors(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice().unwrap(), l.bias.as_slice().unwrap()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_slice_mut().unwrap(), l.bias.as_slice_mut().unwrap()])
            .collect()
    }

    /// Weight-decay mask matching [`Mlp::tensors`]: weights decay, biases do not.
    pub fn decay_mask(&self) -> Vec<bool> {
        self.layers.iter().flat_map(|_| [true, false]).collect()
    }

    fn check_input(&self, x: &ArrayView2<T>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape { expected: self.input_dim(), got: x.ncols() });
        }
        Ok(())
    }

    /// Outputs for each row of `x`, without keeping activations.
    pub fn forward(&self, x: ArrayView2<T>) -> Result<Array1<T>> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut a = h.dot(&layer.weight.t());
            a += &layer.bias;
            if i < last {
                a.mapv_inplace(silu);
            }
            h = a;
        }
        Ok(h.column(0).to_owned())
    }

    pub fn forward_cached(&self, x: ArrayView2<T>) -> Result<(Array1<T>, ForwardCache<T>)> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut cache = ForwardCache { inputs: Vec::with_capacity(self.layers.len()), pre: Vec::new() };
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut a = h.dot(&layer.weight.t());
            a += &layer.bias;
            cache.inputs.push(h);
            if i < last {
                h = a.mapv(silu);
                cache.pre.push(a);
            } else {
                h = a;
            }
        }
        Ok((h.column(0).to_owned(), cache))
    }

    /// Outputs and their gradients with respect to each input row, in one
    /// pass that keeps only the activation derivatives.
    pub fn forward_input_grad(&self, x: ArrayView2<T>) -> Result<(Array1<T>, Array2<T>)> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut derivs = Vec::with_capacity(last);
        let mut h = x.to_owned();
        for layer in &self.layers[..last] {
            let mut a = h.dot(&layer.weight.t());
            a += &layer.bias;
            let mut d = Array2::zeros(a.raw_dim());
            ndarray::Zip::from(&mut a).and(&mut d).for_each(|a, d| {
                let s = sigmoid(*a);
                *d = s * (T::one() + *a * (T::one() - s));
                *a = *a * s;
            });
            derivs.push(d);
            h = a;
        }
        let out = &self.layers[last];
        let e = h.dot(&out.weight.row(0)) + out.bias[0];
        let mut g = out.weight.row(0).broadcast(h.raw_dim()).expect("row matches width").to_owned();
        for k in (0..last).rev() {
            g *= &derivs[k];
            g = g.dot(&self.layers[k].weight);
        }
        Ok((e, g))
    }

    /// Backpropagates `d_out` (one upstream gradient per row).
    ///
    /// Returns parameter gradients (summed over rows) when `want_params`,
    /// and the gradient with respect to the input rows when `want_input`.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        d_out: ArrayView1<T>,
        want_params: bool,
        want_input: bool,
    ) -> (Option<Mlp<T>>, Option<Array2<T>>) {
        let n_layers = self.layers.len();
        let mut grads = want_params.then(|| self.zeros_like());
        let mut delta = d_out.to_owned().insert_axis(Axis(1));
        for i in (0..n_layers).rev() {
            let layer = &self.layers[i];
            if let Some(g) = grads.as_mut() {
                let gl = &mut g.layers[i];
                gl.weight = delta.t().dot(&cache.inputs[i]);
                gl.bias = delta.sum_axis(Axis(0));
            }
            if i == 0 && !want_input {
                break;
            }
            let mut upstream = delta.dot(&layer.weight);
            if i > 0 {
                ndarray::Zip::from(&mut upstream)
                    .and(&cache.pre[i - 1])
                    .for_each(|d, &a| *d = *d * silu_grad(a));
            }
            delta = upstream;
        }
        let input_grad = want_input.then_some(delta);
        (grads, input_grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn loss(net: &Mlp<f64>, x: &Array2<f64>, labels: &[bool]) -> f64 {
        let e = net.forward(x.view()).unwrap();
        e.iter()
            .zip(labels)
            .map(|(&e, &pos)| if pos { softplus(-e) } else { softplus(e) })
            .sum()
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::<f64>::init(&[3, 4, 4, 1], &mut rng).unwrap();
        let x = Array2::from_shape_fn((6, 3), |(i, j)| ((i * 3 + j) as f64 * 0.37).sin());
        let labels = [true, false, true, true, false, false];
        let (e, cache) = net.forward_cached(x.view()).unwrap();
        let d_out: Array1<f64> =
            e.iter().zip(&labels).map(|(&e, &p)| if p { sigmoid(e) - 1.0 } else { sigmoid(e) }).collect();
        let (grads, _) = net.backward(&cache, d_out.view(), true, false);
        let grads = grads.unwrap();

        let h = 1e-6;
        let analytic: Vec<f64> = grads.tensors().concat();
        let mut numeric = Vec::new();
        let n_tensors = net.tensors().len();
        for t in 0..n_tensors {
            for k in 0..net.tensors()[t].len() {
                let mut plus = net.clone();
                plus.tensors_mut()[t][k] += h;
                let mut minus = net.clone();
                minus.tensors_mut()[t][k] -= h;
                numeric.push((loss(&plus, &x, &labels) - loss(&minus, &x, &labels)) / (2.0 * h));
            }
        }
        for (a, n) in analytic.iter().zip(&numeric) {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
            assert!(rel <= 1e-4 || (a - n).abs() < 1e-9, "analytic {a} vs numeric {n}");
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Mlp::<f64>::init(&[2, 8, 8, 1], &mut rng).unwrap();
        let x = array![[0.3, -0.7], [1.2, 0.4]];
        let (_, cache) = net.forward_cached(x.view()).unwrap();
        let (_, dx) = net.backward(&cache, Array1::ones(2).view(), false, true);
        let dx = dx.unwrap();
        let h = 1e-6;
        for r in 0..2 {
            for c in 0..2 {
                let mut xp = x.clone();
                xp[[r, c]] += h;
                let mut xm = x.clone();
                xm[[r, c]] -= h;
                let fd = (net.forward(xp.view()).unwrap()[r] - net.forward(xm.view()).unwrap()[r]) / (2.0 * h);
                assert!((fd - dx[[r, c]]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn fused_input_gradient_matches_backprop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for sizes in [vec![3, 1], vec![3, 5, 1], vec![2, 6, 4, 1]] {
            let net = Mlp::<f64>::init(&sizes, &mut rng).unwrap();
            let x = Array2::from_shape_fn((4, sizes[0]), |(r, c)| (r as f64 - 1.5) * 0.7 + c as f64 * 0.3);
            let (e, cache) = net.forward_cached(x.view()).unwrap();
            let (_, dx) = net.backward(&cache, Array1::ones(4).view(), false, true);
            let (e2, dx2) = net.forward_input_grad(x.view()).unwrap();
            assert!(e.iter().zip(&e2).all(|(a, b)| (a - b).abs() < 1e-12));
            assert!(dx.unwrap().iter().zip(&dx2).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn shape_errors() {
        let net = Mlp::<f32>::zeros(&[3, 4, 1]).unwrap();
        assert!(matches!(net.forward(Array2::zeros((2, 2)).view()), Err(Error::Shape { .. })));
        assert!(Mlp::<f32>::zeros(&[3, 4, 2]).is_err());
        assert_eq!(net.sizes(), vec![3, 4, 1]);
        assert_eq!(net.parameter_count(), 3 * 4 + 4 + 4 + 1);
    }

    #[test]
    fn numerically_stable_helpers() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(-800.0f64) >= 0.0 && sigmoid(800.0f64) == 1.0);
        assert!((softplus(1000.0f64) - 1000.0).abs() < 1e-12);
        assert!(softplus(-1000.0f64) >= 0.0);
    }
}
