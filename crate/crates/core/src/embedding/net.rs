// SPDX-License-Identifier: Apache-2.0

//! Fully connected embedding network with rectified hidden layers and a
//! unit-norm output.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_LAYER_SIZES: [usize; 4] = [1080, 256, 128, 64];

#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    /// `out x in`.
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

/// Gradient with the same shapes as the network layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Real> Gradient<T> {
    pub fn flat(&self) -> Vec<T> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingNet<T> {
    layers: Vec<Layer<T>>,
    /// Inputs are standardized as `(x - input_mean) * input_scale` before the first layer.
    input_mean: Array1<T>,
    input_scale: Array1<T>,
}

/// Activations kept from a forward pass for backpropagation.
pub struct Forward<T> {
    /// `acts[0]` is the standardized input, `acts[l]` the output of layer `l`.
    acts: Vec<Array2<T>>,
    norms: Array1<T>,
    pub embeddings: Array2<T>,
}

impl<T: Real> EmbeddingNet<T> {
    /// He-initialized network with identity input standardization.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least one layer");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let normal = Normal::new(0.0, (2.0 / w[0] as f64).sqrt()).expect("finite std");
                Layer {
                    weights: Array2::from_shape_simple_fn((w[1], w[0]), || T::lit(normal.sample(rng))),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Self::with_layers(layers)
    }

    /// All weights and biases zero.
    pub fn zeros(sizes: &[usize]) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| Layer { weights: Array2::zeros((w[1], w[0])), bias: Array1::zeros(w[1]) })
            .collect();
        Self::with_layers(layers)
    }

    pub fn with_layers(layers: Vec<Layer<T>>) -> Self {
        let dim = layers[0].weights.ncols();
        for pair in layers.windows(2) {
            assert_eq!(pair[0].weights.nrows(), pair[1].weights.ncols(), "layer sizes do not chain");
        }
        for l in &layers {
            assert_eq!(l.weights.nrows(), l.bias.len());
        }
        Self { layers, input_mean: Array1::zeros(dim), input_scale: Array1::ones(dim) }
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(|l| l.weights.nrows())).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.nrows()
    }

    pub fn input_standardization(&self) -> (&Array1<T>, &Array1<T>) {
        (&self.input_mean, &self.input_scale)
    }

    pub fn set_input_standardization(&mut self, mean: Array1<T>, scale: Array1<T>) {
        assert_eq!(mean.len(), self.input_dim());
        assert_eq!(scale.len(), self.input_dim());
        self.input_mean = mean;
        self.input_scale = scale;
    }

    /// Fits the input standardization to the rows of `x`.
    pub fn fit_input_standardization(&mut self, x: ArrayView2<'_, T>) {
        let n = T::of_usize(x.nrows().max(1));
        let mean = x.sum_axis(Axis(0)) / n;
        let mut var = Array1::<T>::zeros(x.ncols());
        for row in x.rows() {
            for ((v, &xi), &m) in var.iter_mut().zip(row.iter()).zip(mean.iter()) {
                *v = *v + (xi - m) * (xi - m);
            }
        }
        let scale = var.mapv(|v| T::one() / (v / n + T::lit(1e-8)).sqrt());
        self.set_input_standardization(mean, scale);
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn locate(&self, mut i: usize) -> (usize, Option<(usize, usize)>, usize) {
        for (li, l) in self.layers.iter().enumerate() {
            let nw = l.weights.len();
            if i < nw {
                let cols = l.weights.ncols();
                return (li, Some((i / cols, i % cols)), 0);
            }
            i -= nw;
            if i < l.bias.len() {
                return (li, None, i);
            }
            i -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Parameter `i` in layer order (weights row-major, then bias).
    pub fn param(&self, i: usize) -> T {
        match self.locate(i) {
            (l, Some(rc), _) => self.layers[l].weights[rc],
            (l, None, b) => self.layers[l].bias[b],
        }
    }

    pub fn set_param(&mut self, i: usize, v: T) {
        match self.locate(i) {
            (l, Some(rc), _) => self.layers[l].weights[rc] = v,
            (l, None, b) => self.layers[l].bias[b] = v,
        }
    }

    pub fn params(&self) -> Vec<T> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied()).collect()
    }

    pub fn set_params(&mut self, values: &[T]) {
        assert_eq!(values.len(), self.num_params());
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().expect("length checked");
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }

    /// Forward pass over a batch of flattened inputs (one per row).
    pub fn forward(&self, x: ArrayView2<'_, T>) -> Result<Forward<T>> {
        let mut a = (&x - &self.input_mean.view().insert_axis(Axis(0))) * self.input_scale.view().insert_axis(Axis(0));
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let mut z = a.dot(&l.weights.t()) + l.bias.view().insert_axis(Axis(0));
            if li < last {
                z.mapv_inplace(|v| v.max(T::zero()));
            }
            acts.push(a);
            a = z;
        }
        let norms = a.map_axis(Axis(1), |r| r.dot(&r).sqrt());
        if norms.iter().any(|&n| !(n > T::zero()) || !n.is_finite()) {
            return Err(Error::DegenerateNorm);
        }
        let embeddings = &a / &norms.view().insert_axis(Axis(1));
        acts.push(a);
        Ok(Forward { acts, norms, embeddings })
    }

    /// Unit-norm embedding of one flattened input.
    pub fn embed_flat(&self, x: ArrayView1<'_, T>) -> Result<Array1<T>> {
        let f = self.forward(x.insert_axis(Axis(0)))?;
        Ok(f.embeddings.row(0).to_owned())
    }

    /// Unit-norm embedding of a feature matrix (flattened row-major).
    pub fn embed(&self, features: &Array2<T>) -> Result<Array1<T>> {
        let flat: Array1<T> = features.iter().copied().collect();
        if flat.len() != self.input_dim() {
            return Err(Error::Invalid(format!(
                "feature size {} does not match network input {}",
                flat.len(),
                self.input_dim()
            )));
        }
        self.embed_flat(flat.view())
    }

    /// Backpropagates `d_emb` (gradient w.r.t. the unit embeddings).
    pub fn backward(&self, fwd: &Forward<T>, d_emb: &Array2<T>) -> Gradient<T> {
        let e = &fwd.embeddings;
        // d(z/|z|) = (I - e e^T) / |z|
        let proj = (d_emb * e).sum_axis(Axis(1));
        let mut delta = (d_emb - &(e * &proj.view().insert_axis(Axis(1)))) / fwd.norms.view().insert_axis(Axis(1));
        let mut grads: Vec<Layer<T>> = Vec::with_capacity(self.layers.len());
        for li in (0..self.layers.len()).rev() {
            let input = &fwd.acts[li];
            let gw = delta.t().dot(input);
            let gb = delta.sum_axis(Axis(0));
            grads.push(Layer { weights: gw, bias: gb });
            if li > 0 {
                let mut d_in = delta.dot(&self.layers[li].weights);
                d_in.zip_mut_with(input, |d, &a| {
                    if a <= T::zero() {
                        *d = T::zero();
                    }
                });
                delta = d_in;
            }
        }
        grads.reverse();
        Gradient { layers: grads }
    }

    /// `params -= lr * grad`.
    pub fn apply_gradient(&mut self, grad: &Gradient<T>, lr: T) {
        for (l, g) in self.layers.iter_mut().zip(&grad.layers) {
            l.weights.scaled_add(-lr, &g.weights);
            l.bias.scaled_add(-lr, &g.bias);
        }
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }
}
